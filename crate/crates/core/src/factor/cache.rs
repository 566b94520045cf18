//! Factor graphs keyed by node signature, memoized in memory and on disk.
//!
//! Cache file layout (text, one record per line):
//!
//! ```text
//! 3,2,(x)(y+z)
//! undecided 0
//! 0,1|3f|1,1,1;3,2,2;2,5
//! ...
//! EDGES
//! 0 1
//! ```
//!
//! Vertex lines hold the threshold order, the logic bits in hex and the
//! witness (`low;high;thresholds`, each a comma list of rationals).

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use num_rational::BigRational;

use super::{
    band_function, build_factor_graph, FactorError, FactorGraph, FactorVertex, FactorWitness,
    LogicParameter, NodeSignature, OrderParameter, UndecidedPolicy,
};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "DSGRN_CACHE";

pub struct FactorLibrary {
    dir: Option<PathBuf>,
    policy: UndecidedPolicy,
    memo: Mutex<HashMap<String, Arc<FactorGraph>>>,
}

impl FactorLibrary {
    /// Memory-only library.
    pub fn in_memory() -> Self {
        FactorLibrary::with_dir(None)
    }

    pub fn with_dir(dir: Option<PathBuf>) -> Self {
        FactorLibrary {
            dir,
            policy: UndecidedPolicy::default(),
            memo: Mutex::default(),
        }
    }

    /// Uses `$DSGRN_CACHE`, then `$XDG_CACHE_HOME/dsgrn`, then
    /// `$HOME/.cache/dsgrn`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("XDG_CACHE_HOME").map(|d| PathBuf::from(d).join("dsgrn")))
            .or_else(|| std::env::var_os("HOME").map(|d| PathBuf::from(d).join(".cache/dsgrn")));
        FactorLibrary::with_dir(dir)
    }

    pub fn with_policy(mut self, policy: UndecidedPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, signature: &NodeSignature) -> Result<Arc<FactorGraph>, FactorError> {
        let key = signature.to_string();
        if let Some(g) = self.memo.lock().unwrap().get(&key) {
            return Ok(g.clone());
        }
        let path = self
            .dir
            .as_ref()
            .map(|d| d.join(cache_file_name(signature)));
        let loaded = path.as_ref().and_then(|p| read_cache(p, signature).ok());
        let graph = match loaded {
            Some(g) if self.policy == UndecidedPolicy::Exclude || g.undecided == 0 => g,
            _ => {
                let g = build_factor_graph(signature, self.policy)?;
                if let Some(p) = &path {
                    // A failed cache write only costs a rebuild next time.
                    let _ = write_cache(&g, p);
                }
                g
            }
        };
        let graph = Arc::new(graph);
        self.memo.lock().unwrap().insert(key, graph.clone());
        Ok(graph)
    }
}

pub fn cache_file_name(signature: &NodeSignature) -> String {
    let s: String = signature
        .to_string()
        .chars()
        .map(|c| match c {
            ',' => '_',
            '(' => '[',
            ')' => ']',
            '+' => 'p',
            c => c,
        })
        .collect();
    format!("{s}.fg")
}

fn rationals(v: &[BigRational]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn render_cache(graph: &FactorGraph) -> String {
    let mut out = format!("{}\nundecided {}\n", graph.signature, graph.undecided);
    for v in &graph.vertices {
        let order: Vec<String> = v.order.0.iter().map(ToString::to_string).collect();
        let witness = match &v.witness {
            Some(w) => format!(
                "{};{};{}",
                rationals(&w.low),
                rationals(&w.high),
                rationals(&w.thresholds)
            ),
            None => "-".into(),
        };
        out.push_str(&format!(
            "{}|{}|{}\n",
            order.join(","),
            v.logic.to_hex(),
            witness
        ));
    }
    out.push_str("EDGES\n");
    for (a, b) in &graph.edges {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

/// Writes to a temporary file and renames it into place.
pub fn write_cache(graph: &FactorGraph, path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(render_cache(graph).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn read_cache(path: &Path, signature: &NodeSignature) -> Result<FactorGraph, FactorError> {
    let text = fs::read_to_string(path).map_err(|e| cache_error(path, e.to_string()))?;
    parse_cache(&text, signature).map_err(|m| cache_error(path, m))
}

fn cache_error(path: &Path, message: String) -> FactorError {
    FactorError::Cache {
        path: path.display().to_string(),
        message,
    }
}

pub fn parse_cache(text: &str, signature: &NodeSignature) -> Result<FactorGraph, String> {
    let mut lines = text.lines();
    if lines.next() != Some(signature.to_string().as_str()) {
        return Err("signature mismatch".into());
    }
    let undecided = lines
        .next()
        .and_then(|l| l.strip_prefix("undecided "))
        .and_then(|l| l.parse().ok())
        .ok_or("missing undecided count")?;
    let parse_list = |s: &str| -> Result<Vec<BigRational>, String> {
        s.split(',')
            .map(|x| x.parse::<BigRational>().map_err(|e| e.to_string()))
            .collect()
    };
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut in_edges = false;
    for line in lines {
        if line == "EDGES" {
            in_edges = true;
            continue;
        }
        if in_edges {
            let (a, b) = line.split_once(' ').ok_or("bad edge line")?;
            let a: usize = a.parse().map_err(|_| "bad edge")?;
            let b: usize = b.parse().map_err(|_| "bad edge")?;
            edges.push((a, b));
            continue;
        }
        let mut parts = line.split('|');
        let order = parts.next().ok_or("bad vertex line")?;
        let order: Vec<usize> = order
            .split(',')
            .map(|x| x.parse().map_err(|_| "bad order"))
            .collect::<Result<_, _>>()?;
        let bits =
            u64::from_str_radix(parts.next().ok_or("missing bits")?, 16).map_err(|_| "bad bits")?;
        let witness = match parts.next().ok_or("missing witness")? {
            "-" => None,
            w => {
                let groups: Vec<&str> = w.split(';').collect();
                if groups.len() != 3 {
                    return Err("bad witness".into());
                }
                Some(FactorWitness {
                    low: parse_list(groups[0])?,
                    high: parse_list(groups[1])?,
                    thresholds: parse_list(groups[2])?,
                })
            }
        };
        let logic = LogicParameter(bits);
        let band = band_function(logic, signature.n_inputs, signature.n_outputs)
            .map_err(|e| e.to_string())?;
        vertices.push(FactorVertex {
            order: OrderParameter(order),
            logic,
            band,
            witness,
        });
    }
    if edges
        .iter()
        .any(|&(a, b)| a >= vertices.len() || b >= vertices.len())
    {
        return Err("edge endpoint out of range".into());
    }
    Ok(FactorGraph::assemble(
        signature.clone(),
        vertices,
        edges,
        undecided,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_are_path_safe() {
        let s: NodeSignature = "3,2,(x)(y+z)".parse().unwrap();
        assert_eq!(cache_file_name(&s), "3_2_[x][ypz].fg");
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s: NodeSignature = "2,2,(x)(y)".parse().unwrap();
        let g = build_factor_graph(&s, UndecidedPolicy::Reject).unwrap();
        let path = dir.path().join(cache_file_name(&s));
        write_cache(&g, &path).unwrap();
        let h = read_cache(&path, &s).unwrap();
        assert_eq!(g.vertices, h.vertices);
        assert_eq!(g.edges, h.edges);
        assert_eq!(render_cache(&g), render_cache(&h));
    }

    #[test]
    fn library_uses_disk_cache() {
        let dir = tempfile::tempdir().unwrap();
        let s: NodeSignature = "1,2,(x)".parse().unwrap();
        let lib = FactorLibrary::with_dir(Some(dir.path().to_path_buf()));
        let g = lib.get(&s).unwrap();
        assert!(dir.path().join(cache_file_name(&s)).exists());
        let again = FactorLibrary::with_dir(Some(dir.path().to_path_buf()))
            .get(&s)
            .unwrap();
        assert_eq!(g.vertices, again.vertices);
    }

    #[test]
    fn corrupt_cache_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let s: NodeSignature = "1,1,(x)".parse().unwrap();
        fs::write(dir.path().join(cache_file_name(&s)), "garbage").unwrap();
        let g = FactorLibrary::with_dir(Some(dir.path().to_path_buf()))
            .get(&s)
            .unwrap();
        assert_eq!(g.len(), 3);
    }
}
