use mixmap::markov_graph::{is_edge, vertices_containing_exact};
use mixmap::symbolic::{cylinder, itinerary_of_point};
use mixmap::{build_map, Error, MapParams, PiecewiseMap};
use num_rational::BigRational;
use proptest::prelude::*;
use std::sync::OnceLock;

fn map() -> &'static PiecewiseMap<f64> {
    static M: OnceLock<PiecewiseMap<f64>> = OnceLock::new();
    M.get_or_init(|| build_map(&MapParams::new(14.0, 1).unwrap(), 8).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eval_stays_in_domain(x in 0.0f64..=4.0) {
        let y = map().eval(x).unwrap();
        prop_assert!((0.0..=4.0).contains(&y));
    }

    #[test]
    fn derivative_bounded_by_lambda(x in 0.0f64..=4.0) {
        let d = map().eval_derivative(x, 1).unwrap().abs();
        prop_assert!(d <= 14.0 * (1.0 + 1e-12), "f'({}) = {}", x, d);
    }

    #[test]
    fn interior_points_have_one_vertex(x in 0.001f64..4.0) {
        let q = BigRational::from_float(x).unwrap();
        let vs = vertices_containing_exact(map().params(), &q);
        // laps of deep levels are not indexed
        prop_assume!(!vs.is_empty());
        prop_assert!(vs.len() <= 2);
    }

    #[test]
    fn codes_are_paths_and_cylinders_contain_the_point(x in 0.0f64..4.0, m in 2usize..12) {
        let it = match itinerary_of_point(map(), x, m) {
            Ok(it) => it,
            Err(Error::Unresolved(_)) | Err(Error::ExceptionalPoint { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for w in it.head.windows(2) {
            prop_assert!(is_edge(w[0], w[1], map().params()).unwrap(), "{:?}", w);
        }
        let c = cylinder(map(), &it.head).unwrap();
        let slack = 1e-9 * (1.0 + c.diameter());
        prop_assert!(c.lo - slack <= x && x <= c.hi + slack, "{} not in [{}, {}]", x, c.lo, c.hi);
    }
}
