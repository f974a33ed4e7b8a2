//! JSON file formats for networks, compositions and conversion inputs.
//!
//! Vertices are referred to by name. Resistances are numbers or the string
//! `"inf"`. Programs are tagged by `"type"`.
//!
//! ```
//! use spanflow::io::CompositionFile;
//!
//! let json = r#"{
//!   "vertices": ["s", "t"], "s": "s", "t": "t",
//!   "edges": [
//!     {"tail": "s", "head": "t", "program": {"type": "bit", "index": 0}},
//!     {"tail": "s", "head": "t", "program": {"type": "bit", "index": 1}}
//!   ]
//! }"#;
//! let file: CompositionFile = serde_json::from_str(json).unwrap();
//! let program = file.to_program().unwrap();
//! assert!(program.accepts(b"01").unwrap());
//! assert!((program.evaluate(b"00").unwrap().size - 2.0).abs() < 1e-12);
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::catalog::ProblemSpec;
use crate::error::{invalid, Error, Result};
use crate::frameworks::{DecisionTree, Formula, LearningGraph, TreeFamily};
use crate::graphcomp::{CompositionGraph, Program, ProgramKind};
use crate::netlab::{Resistance, ResistorNetwork};
use crate::spanprog::Predicate;
use std::sync::Arc;

/// Version stamped on every report and accepted by every reader.
pub const SCHEMA_VERSION: u32 = 1;

/// Resistance as written in files: a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResistanceValue {
    Finite(f64),
    Named(InfinityTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl From<Resistance> for ResistanceValue {
    fn from(r: Resistance) -> Self {
        match r {
            Resistance::Finite(v) => ResistanceValue::Finite(v),
            Resistance::Infinite => ResistanceValue::Named(InfinityTag::Inf),
        }
    }
}

impl From<ResistanceValue> for Resistance {
    fn from(r: ResistanceValue) -> Self {
        match r {
            ResistanceValue::Finite(v) => Resistance::Finite(v),
            ResistanceValue::Named(_) => Resistance::Infinite,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub tail: String,
    pub head: String,
    pub r: ResistanceValue,
}

/// A resistor network with optional terminals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub vertices: Vec<String>,
    pub edges: Vec<NetworkEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
}

fn index_of(names: &HashMap<&str, usize>, v: &str) -> Result<usize> {
    names.get(v).copied().ok_or_else(|| Error::Invalid(format!("unknown vertex {v:?}")))
}

fn name_map(vertices: &[String]) -> Result<HashMap<&str, usize>> {
    let mut m = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        if m.insert(v.as_str(), i).is_some() {
            return invalid(format!("duplicate vertex name {v:?}"));
        }
    }
    Ok(m)
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<ResistorNetwork> {
        let names = name_map(&self.vertices)?;
        let mut net = ResistorNetwork::with_names(self.vertices.clone());
        for (k, e) in self.edges.iter().enumerate() {
            let (u, v) = (index_of(&names, &e.tail)?, index_of(&names, &e.head)?);
            net.add_named_edge(e.id.clone().unwrap_or_else(|| format!("e{k}")), u, v, e.r.into());
        }
        match (&self.s, &self.t) {
            (Some(s), Some(t)) => net.set_terminals(index_of(&names, s)?, index_of(&names, t)?),
            (None, None) => {}
            _ => return invalid("give both terminals or neither"),
        }
        net.validate()?;
        Ok(net)
    }

    pub fn from_network(net: &ResistorNetwork) -> NetworkFile {
        let names = net.vertex_names();
        NetworkFile {
            vertices: names.to_vec(),
            edges: net
                .edges()
                .iter()
                .map(|e| NetworkEdge { id: Some(e.id.clone()), tail: names[e.tail].clone(), head: names[e.head].clone(), r: e.r.into() })
                .collect(),
            s: net.source().map(|s| names[s].clone()),
            t: net.sink().map(|t| names[t].clone()),
        }
    }
}

/// A span program as written in files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProgramSpec {
    Const { value: bool },
    /// `[x_index = '1']`.
    Bit { index: usize },
    /// `[x_index = '0']`.
    NotBit { index: usize },
    /// `[x_index = symbol]`, or `!=` when `negate`.
    Symbol {
        index: usize,
        symbol: char,
        #[serde(default)]
        negate: bool,
    },
    /// `[x_i < x_j]`, or `>=` when `negate`.
    Less {
        i: usize,
        j: usize,
        #[serde(default)]
        negate: bool,
    },
    Scaled { alpha: f64, program: Box<ProgramSpec> },
    Not { program: Box<ProgramSpec> },
    Graph(Box<CompositionFile>),
    Catalog { spec: ProblemSpec },
    Tree { tree: DecisionTree },
}

impl ProgramSpec {
    pub fn to_program(&self) -> Result<Program> {
        Ok(match self {
            ProgramSpec::Const { value } => Program::constant(*value),
            ProgramSpec::Bit { index } => Program::trivial(Predicate::bit(*index)),
            ProgramSpec::NotBit { index } => Program::trivial(Predicate::not_bit(*index)),
            ProgramSpec::Symbol { index, symbol, negate } => {
                let c = u8::try_from(*symbol as u32).map_err(|_| Error::Invalid(format!("symbol {symbol:?} is not a byte")))?;
                let p = Predicate::equals(*index, c);
                Program::trivial(if *negate { p.not() } else { p })
            }
            ProgramSpec::Less { i, j, negate } => {
                let p = Predicate::less(*i, *j);
                Program::trivial(if *negate { p.not() } else { p })
            }
            ProgramSpec::Scaled { alpha, program } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Range(format!("scale {alpha} must be positive and finite")));
                }
                program.to_program()?.scaled(*alpha)
            }
            ProgramSpec::Not { program } => program.to_program()?.negated(),
            ProgramSpec::Graph(g) => Program::graph(g.to_graph()?)?,
            ProgramSpec::Catalog { spec } => Program::graph(spec.build()?)?,
            ProgramSpec::Tree { tree } => Program::graph(crate::frameworks::tree_to_st(tree)?)?,
        })
    }

    /// Writes a program back out. Shared subprograms are written once per use.
    pub fn from_program(p: &Program) -> Result<ProgramSpec> {
        Ok(match p.kind() {
            ProgramKind::Trivial(pred) => match pred {
                Predicate::Const(b) => ProgramSpec::Const { value: *b },
                Predicate::Symbol { index, symbol: b'1', equal: true } => ProgramSpec::Bit { index: *index },
                Predicate::Symbol { index, symbol: b'1', equal: false } => ProgramSpec::NotBit { index: *index },
                Predicate::Symbol { index, symbol, equal } => {
                    ProgramSpec::Symbol { index: *index, symbol: char::from(*symbol), negate: !equal }
                }
                Predicate::Compare { i, j, less } => ProgramSpec::Less { i: *i, j: *j, negate: !less },
                Predicate::Custom { name, .. } => return invalid(format!("custom predicate {name:?} has no file form")),
            },
            ProgramKind::Scaled(a, inner) => ProgramSpec::Scaled { alpha: a, program: Box::new(Self::from_program(inner)?) },
            ProgramKind::Negated(inner) => ProgramSpec::Not { program: Box::new(Self::from_program(inner)?) },
            ProgramKind::Graph(g) => ProgramSpec::Graph(Box::new(CompositionFile::from_graph(g)?)),
            ProgramKind::Dense(_) => return invalid("explicit span programs have no file form"),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionEdge {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub tail: String,
    pub head: String,
    pub program: ProgramSpec,
}

/// A composition graph: named vertices, terminals and programs on edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionFile {
    pub vertices: Vec<String>,
    pub s: String,
    pub t: String,
    pub edges: Vec<CompositionEdge>,
}

impl CompositionFile {
    pub fn to_graph(&self) -> Result<CompositionGraph> {
        let names = name_map(&self.vertices)?;
        let mut g = CompositionGraph::with_names(self.vertices.clone(), index_of(&names, &self.s)?, index_of(&names, &self.t)?);
        for (k, e) in self.edges.iter().enumerate() {
            let (u, v) = (index_of(&names, &e.tail)?, index_of(&names, &e.head)?);
            g.add_named_edge(e.id.clone().unwrap_or_else(|| format!("e{k}")), u, v, e.program.to_program()?);
        }
        g.validate()?;
        Ok(g)
    }

    pub fn to_program(&self) -> Result<Program> {
        Program::graph(self.to_graph()?)
    }

    pub fn from_graph(g: &CompositionGraph) -> Result<CompositionFile> {
        let names = g.vertex_names();
        Ok(CompositionFile {
            vertices: names.to_vec(),
            s: names[g.source()].clone(),
            t: names[g.sink()].clone(),
            edges: g
                .edges()
                .iter()
                .map(|e| {
                    Ok(CompositionEdge {
                        id: Some(e.id.clone()),
                        tail: names[e.tail].clone(),
                        head: names[e.head].clone(),
                        program: ProgramSpec::from_program(&e.program)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// Input of the `convert` command: a classical model to turn into a composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvertSpec {
    Tree { tree: DecisionTree },
    /// Zero-error family on `n` bits; the function is read off the 1-leaves.
    ZeroErrorFamily { n: usize, family: TreeFamily },
    /// Bounded-error family on `n` bits; the function is the majority output.
    RandomizedFamily { n: usize, family: TreeFamily },
    /// Formula over leaf programs, balanced on all `n`-bit inputs.
    Formula { n: usize, formula: Arc<Formula>, leaves: Vec<ProgramSpec> },
    /// Learning graph on `n` bits; the positive inputs are the keys of `flows`.
    LearningGraph { graph: LearningGraph },
}

/// Reads a JSON file into `T`.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Envelope of every command output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    pub command: String,
    /// False when a checked property failed.
    pub ok: bool,
    pub data: T,
}

impl<T> Report<T> {
    pub fn new(command: &str, ok: bool, data: T) -> Report<T> {
        Report { schema_version: SCHEMA_VERSION, command: command.to_string(), ok, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::threshold;
    use crate::spanprog::binary_inputs;

    #[test]
    fn resistance_values_round_trip() {
        let json = r#"{"vertices":["a","b"],"edges":[{"tail":"a","head":"b","r":"inf"},{"tail":"a","head":"b","r":2.5}],"s":"a","t":"b"}"#;
        let f: NetworkFile = serde_json::from_str(json).unwrap();
        let net = f.to_network().unwrap();
        assert!(net.edges()[0].r.is_infinite());
        let back = NetworkFile::from_network(&net);
        assert_eq!(back.edges[1].r, ResistanceValue::Finite(2.5));
        let again: NetworkFile = serde_json::from_str(&serde_json::to_string(&back).unwrap()).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn threshold_round_trip_keeps_witness_sizes() {
        let g = threshold(4, 2).unwrap();
        let file = CompositionFile::from_graph(&g).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back: CompositionFile = serde_json::from_str(&text).unwrap();
        let (p, q) = (Program::graph(g).unwrap(), back.to_program().unwrap());
        for x in binary_inputs(4) {
            assert_eq!(p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn tree_json_shape() {
        let json = r#"{"query": 0, "w0": 1.0, "w1": 2.0, "c0": {"leaf": "0"}, "c1": {"leaf": "1"}}"#;
        let t: DecisionTree = serde_json::from_str(json).unwrap();
        assert_eq!(t.depth(), 1);
        let spec: ConvertSpec = serde_json::from_str(&format!(r#"{{"kind": "tree", "tree": {json}}}"#)).unwrap();
        assert!(matches!(spec, ConvertSpec::Tree { .. }));
    }
}
