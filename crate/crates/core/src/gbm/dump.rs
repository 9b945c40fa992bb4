//! Plain-text model dump.
//!
//! ```text
//! gbm objective=poisson_log base_score=1.2 learning_rate=0.1 n_features=4
//! tree 0
//! node 0: [x1 < 0.5] yes=1 no=2
//! leaf 1: -0.25
//! leaf 2: 0.31
//! ```
//!
//! Feature indices are 1-based to match the `x1,...,xB` CSV columns. Floats
//! are written in shortest round-trip form, so a reloaded model predicts
//! bit-for-bit the same values.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{GbmModel, GbmObjective, Node, Tree};
use crate::error::{Error, Result};

impl GbmModel {
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "gbm objective={} base_score={} learning_rate={} n_features={}",
            self.objective, self.base_score, self.learning_rate, self.n_features
        );
        for (t, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {t}");
            for (id, node) in tree.nodes.iter().enumerate() {
                let _ = match node {
                    Node::Split {
                        feature,
                        threshold,
                        yes,
                        no,
                    } => writeln!(
                        out,
                        "node {id}: [x{} < {threshold}] yes={yes} no={no}",
                        feature + 1
                    ),
                    Node::Leaf { value } => writeln!(out, "leaf {id}: {value}"),
                };
            }
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty model dump"))?;
        let fields = parse_header(line_no, header)?;
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| Error::parse(line_no, format!("header lacks `{key}`")))
        };
        let objective: GbmObjective = get("objective")?.parse()?;
        let base_score = parse_num::<f64>(line_no, get("base_score")?)?;
        let learning_rate = parse_num::<f64>(line_no, get("learning_rate")?)?;
        let n_features = parse_num::<usize>(line_no, get("n_features")?)?;

        let mut trees = Vec::new();
        let mut current: Option<(usize, Vec<(usize, Node)>)> = None;
        for (line_no, line) in lines {
            if let Some(rest) = line.strip_prefix("tree ") {
                if let Some((start, nodes)) = current.take() {
                    trees.push(assemble(start, nodes)?);
                }
                let idx = parse_num::<usize>(line_no, rest)?;
                if idx != trees.len() {
                    return Err(Error::parse(line_no, format!("expected tree {}", trees.len())));
                }
                current = Some((line_no, Vec::new()));
                continue;
            }
            let nodes = match current.as_mut() {
                Some((_, nodes)) => nodes,
                None => return Err(Error::parse(line_no, "node outside a tree block")),
            };
            nodes.push(parse_node(line_no, line, n_features)?);
        }
        if let Some((start, nodes)) = current {
            trees.push(assemble(start, nodes)?);
        }
        GbmModel::new(base_score, learning_rate, objective, n_features, trees)
    }
}

fn parse_header(line_no: usize, header: &str) -> Result<HashMap<&str, &str>> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some("gbm") {
        return Err(Error::parse(line_no, "dump must start with a `gbm` header"));
    }
    parts
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("bad header field `{kv}`")))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(line_no: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad number `{s}`")))
}

fn parse_node(line_no: usize, line: &str, n_features: usize) -> Result<(usize, Node)> {
    let bad = || Error::parse(line_no, format!("malformed node line `{line}`"));
    if let Some(rest) = line.strip_prefix("leaf ") {
        let (id, value) = rest.split_once(':').ok_or_else(bad)?;
        return Ok((
            parse_num(line_no, id)?,
            Node::Leaf {
                value: parse_num(line_no, value)?,
            },
        ));
    }
    let rest = line.strip_prefix("node ").ok_or_else(bad)?;
    let (id, rest) = rest.split_once(':').ok_or_else(bad)?;
    let rest = rest.trim().strip_prefix("[x").ok_or_else(bad)?;
    let (cond, rest) = rest.split_once(']').ok_or_else(bad)?;
    let (feature, threshold) = cond.split_once('<').ok_or_else(bad)?;
    let feature: usize = parse_num(line_no, feature)?;
    if feature == 0 || feature > n_features {
        return Err(Error::parse(line_no, format!("feature x{feature} out of range")));
    }
    let mut yes = None;
    let mut no = None;
    for part in rest.split_whitespace() {
        match part.split_once('=') {
            Some(("yes", v)) => yes = Some(parse_num(line_no, v)?),
            Some(("no", v)) => no = Some(parse_num(line_no, v)?),
            _ => return Err(bad()),
        }
    }
    Ok((
        parse_num(line_no, id)?,
        Node::Split {
            feature: feature - 1,
            threshold: parse_num(line_no, threshold)?,
            yes: yes.ok_or_else(bad)?,
            no: no.ok_or_else(bad)?,
        },
    ))
}

/// Orders parsed nodes by id and checks that every child reference resolves.
fn assemble(line_no: usize, mut nodes: Vec<(usize, Node)>) -> Result<Tree> {
    nodes.sort_by_key(|(id, _)| *id);
    if nodes.is_empty() || nodes.iter().enumerate().any(|(i, (id, _))| i != *id) {
        return Err(Error::parse(line_no, "tree node ids must be 0..n without gaps"));
    }
    let n = nodes.len();
    for (id, node) in &nodes {
        if let Node::Split { yes, no, .. } = node {
            if *yes >= n || *no >= n || *yes <= *id || *no <= *id {
                return Err(Error::parse(line_no, format!("node {id} has a bad child reference")));
            }
        }
    }
    Ok(Tree {
        nodes: nodes.into_iter().map(|(_, n)| n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{fit_gbm, GbmConfig};
    use super::*;
    use crate::data::Dataset;
    use proptest::prelude::*;

    #[test]
    fn dump_format_shape() {
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    yes: 1,
                    no: 2,
                },
                Node::Leaf { value: -0.25 },
                Node::Leaf { value: 1.0 },
            ],
        };
        let m = GbmModel::new(0.5, 0.1, GbmObjective::SquaredErrorIdentity, 2, vec![tree]).unwrap();
        assert_eq!(
            m.dump(),
            "gbm objective=squared_error_identity base_score=0.5 learning_rate=0.1 n_features=2\n\
             tree 0\nnode 0: [x2 < 0.5] yes=1 no=2\nleaf 1: -0.25\nleaf 2: 1\n"
        );
        assert_eq!(GbmModel::load(&m.dump()).unwrap(), m);
    }

    #[test]
    fn rejects_malformed_dumps() {
        assert!(GbmModel::load("").is_err());
        assert!(GbmModel::load("gbm objective=poisson_log base_score=0 learning_rate=0.1").is_err());
        let head = "gbm objective=poisson_log base_score=0 learning_rate=0.1 n_features=1\n";
        assert!(GbmModel::load(&format!("{head}leaf 0: 1\n")).is_err());
        assert!(GbmModel::load(&format!("{head}tree 0\nnode 0: [x2 < 0.5] yes=1 no=2\nleaf 1: 0\nleaf 2: 0\n")).is_err());
        assert!(GbmModel::load(&format!("{head}tree 0\nnode 0: [x1 < 0.5] yes=1 no=5\nleaf 1: 0\nleaf 2: 0\n")).is_err());
        assert!(GbmModel::load(&format!("{head}tree 1\nleaf 0: 1\n")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reload_predicts_bit_exactly(seed in any::<u64>(), d in 1usize..=4, poisson in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 80;
            let feats: Vec<f64> = (0..n * 3).map(|i| if i % 3 == 2 { rng.random_range(0.0..10.0) } else { rng.random_range(0..=1) as f64 }).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..9) as f64).collect();
            let ds = Dataset::new(3, feats, y).unwrap();
            let objective = if poisson { GbmObjective::PoissonLog } else { GbmObjective::SquaredErrorIdentity };
            let config = GbmConfig { max_depth: d, n_trees: 12, learning_rate: 0.37, objective, ..GbmConfig::default() };
            let m = fit_gbm(&ds, &config).unwrap();
            let back = GbmModel::load(&m.dump()).unwrap();
            let a = m.predict_dataset(&ds).unwrap();
            let b = back.predict_dataset(&ds).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
