use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{build_truncated_graph, subgraph_hn, vertex_interval, GraphKind, TruncatedGraph, Vertex};
use crate::error::Error;
use crate::params::MapParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Dot,
}

impl FromStr for GraphFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "json" => Ok(GraphFormat::Json),
            "dot" => Ok(GraphFormat::Dot),
            _ => Err(Error::Parse(format!("unknown graph format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub family: String,
    pub n: u32,
    pub i_or_k: Option<u64>,
    pub label: String,
    /// `[a_num, a_den, b_num, b_den]`
    pub interval: [String; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub params: MapParams,
    #[serde(rename = "N")]
    pub n_cap: u32,
    pub kind: String,
    pub vertices: Vec<VertexDoc>,
    /// Index pairs into `vertices`.
    pub edges: Vec<[usize; 2]>,
    /// Labels of vertices with out-edges cut by the truncation.
    pub truncated_out: Vec<String>,
}

fn kind_name(k: GraphKind) -> String {
    match k {
        GraphKind::Truncation => "truncation".into(),
        GraphKind::Subgraph { n } => format!("H_{n}"),
    }
}

impl TruncatedGraph {
    pub fn to_doc(&self) -> Result<GraphDoc, Error> {
        let vs = self.vertices()?;
        let index: BTreeMap<Vertex, usize> = vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut vertices = Vec::with_capacity(vs.len());
        for &v in &vs {
            let (a, b) = vertex_interval(v, &self.params)?;
            vertices.push(VertexDoc {
                family: v.family().into(),
                n: v.level(),
                i_or_k: v.index(),
                label: v.to_string(),
                interval: [
                    a.numer().to_string(),
                    a.denom().to_string(),
                    b.numer().to_string(),
                    b.denom().to_string(),
                ],
            });
        }
        let edges = self
            .edges()?
            .into_iter()
            .map(|(u, w)| [index[&u], index[&w]])
            .collect();
        Ok(GraphDoc {
            params: self.params.clone(),
            n_cap: self.n_cap,
            kind: kind_name(self.kind),
            vertices,
            edges,
            truncated_out: self.truncated_out()?.iter().map(|v| v.to_string()).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    /// Rebuild from the stored parameters and require an identical document.
    pub fn from_doc(doc: &GraphDoc) -> Result<Self, Error> {
        doc.params.validate()?;
        let g = if doc.kind == "truncation" {
            build_truncated_graph(&doc.params, doc.n_cap)?
        } else if let Some(n) = doc.kind.strip_prefix("H_").and_then(|n| n.parse().ok()) {
            subgraph_hn(&doc.params, n)?
        } else {
            return Err(Error::Parse(format!("unknown graph kind {:?}", doc.kind)));
        };
        for v in &doc.vertices {
            v.label.parse::<Vertex>()?;
        }
        let rebuilt = g.to_doc()?;
        if rebuilt.vertices != doc.vertices {
            return Err(Error::Parse("vertex list does not match the parameters".into()));
        }
        if rebuilt.edges != doc.edges || rebuilt.truncated_out != doc.truncated_out {
            return Err(Error::Parse("edge list does not match the parameters".into()));
        }
        Ok(g)
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        Self::from_doc(&serde_json::from_str(s)?)
    }

    pub fn to_dot(&self) -> Result<String, Error> {
        let g = self.to_petgraph()?;
        let mut out = String::new();
        writeln!(out, "digraph G {{").unwrap();
        for i in g.node_indices() {
            let v = g[i];
            let shape = if self.truncated_out()?.contains(&v) { "box" } else { "ellipse" };
            writeln!(out, "    {} [label=\"{v}\", shape={shape}];", i.index()).unwrap();
        }
        for e in g.raw_edges() {
            writeln!(out, "    {} -> {};", e.source().index(), e.target().index()).unwrap();
        }
        out.push_str("}\n");
        Ok(out)
    }

    pub fn export(&self, fmt: GraphFormat) -> Result<String, Error> {
        match fmt {
            GraphFormat::Json => self.to_json(),
            GraphFormat::Dot => self.to_dot(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let p = MapParams::new(14.0, 1).unwrap();
        for g in [build_truncated_graph(&p, 2).unwrap(), subgraph_hn(&p, 2).unwrap()] {
            let s = g.to_json().unwrap();
            let back = TruncatedGraph::from_json(&s).unwrap();
            assert_eq!(back.to_json().unwrap(), s);
        }
        let g = build_truncated_graph(&p, 1).unwrap();
        let mut doc = g.to_doc().unwrap();
        doc.edges.pop();
        assert!(TruncatedGraph::from_doc(&doc).is_err());
    }

    #[test]
    fn dot_lists_every_edge() {
        let p = MapParams::new(14.0, 1).unwrap();
        let g = build_truncated_graph(&p, 1).unwrap();
        let d = g.to_dot().unwrap();
        assert_eq!(d.matches(" -> ").count() as u64, g.edge_count());
        assert!(d.contains("S:Hump"));
    }
}
