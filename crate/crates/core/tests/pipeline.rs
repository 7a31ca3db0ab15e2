use mixmap::entropy::{
    entropy_loop_count, entropy_spectral, entropy_subgraph_exact, measure_mu_n, separated_upper_bound, Units,
};
use mixmap::markov_graph::{build_truncated_graph, extension_graph, subgraph_hn, TruncatedGraph};
use mixmap::{build_map, MapParams, PiecewiseMap};

fn p(r: u32) -> MapParams {
    MapParams::new(14.0, r).unwrap()
}

#[test]
fn map_json_reload_matches() {
    let m = build_map(&p(2), 3).unwrap();
    let back = PiecewiseMap::<f64>::from_json(&m.to_json().unwrap()).unwrap();
    for i in 0..=400 {
        let x = i as f64 / 100.0;
        assert_eq!(m.eval(x).unwrap(), back.eval(x).unwrap(), "x = {x}");
    }
}

#[test]
fn graphs_independent_of_r() {
    for n in 1..=3 {
        let a = build_truncated_graph(&p(1), n).unwrap();
        let b = build_truncated_graph(&p(2), n).unwrap();
        assert_eq!(a.vertices().unwrap(), b.vertices().unwrap());
        assert_eq!(a.edges().unwrap(), b.edges().unwrap());
    }
}

#[test]
fn graph_json_survives_a_reload() {
    let g = subgraph_hn(&p(1), 2).unwrap();
    let s = g.to_json().unwrap();
    let back = TruncatedGraph::from_json(&s).unwrap();
    assert_eq!(back.to_json().unwrap(), s);
    assert_eq!(back.vertex_count(), 47 + 2);
}

#[test]
fn edges_agree_with_float_images() {
    let m = build_map(&p(1), 4).unwrap();
    let g = build_truncated_graph(&p(1), 2).unwrap();
    assert!(g.validate_edges(&m).unwrap().is_empty());
}

#[test]
fn estimators_are_ordered() {
    let params = p(1);
    let ll = 14f64.ln();
    for n in 1..=4 {
        let sub = entropy_subgraph_exact(&params, n).unwrap().value_nats;
        let g = build_truncated_graph(&params, n + 1).unwrap();
        let spec = entropy_spectral(&g, 1_000_000, 1e-13).unwrap().value_nats;
        let upper = separated_upper_bound(&params, n, 0.5).unwrap().value_nats;
        assert!(sub <= spec + 1e-12 && spec <= ll && ll <= upper, "n={n}: {sub} {spec} {upper}");
    }
    let g = build_truncated_graph(&params, 2).unwrap();
    let spec = entropy_spectral(&g, 1_000_000, 1e-13).unwrap().value_nats;
    let loops = entropy_loop_count(&g, 80).unwrap().value_nats;
    assert!((loops - spec).abs() < 0.05, "{loops} vs {spec}");
}

#[test]
fn extension_adds_two_laps_at_level_two() {
    let e = extension_graph(&p(1)).unwrap();
    let extra = e.extra_vertices().unwrap();
    assert_eq!(extra.len(), 2);
    let rep = e.embedding(3).unwrap();
    assert!(rep.recovers_base && rep.strict);
    assert_eq!(rep.extension_vertices, rep.base_vertices + 2);
}

#[test]
fn measure_report_exports() {
    let mu = measure_mu_n(&p(1), 3, 20).unwrap();
    let csv = mu.histogram_csv().unwrap();
    assert_eq!(csv.lines().count(), 21);
    let r = entropy_subgraph_exact(&p(1), 3).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json(Units::Bits).unwrap()).unwrap();
    assert!((v["value_nats"].as_f64().unwrap() - mu.entropy).abs() < 1e-12);
}
