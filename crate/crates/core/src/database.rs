//! Morse graph databases: one annotated Morse graph per parameter,
//! deduplicated, persisted as a plain directory and queried in process.
//!
//! Directory layout:
//!
//! - `network.txt`: the network specification.
//! - `meta.txt`: `dsgrndb 1` followed by `key=value` lines (parameter count,
//!   id width, build time, engine, checksum).
//! - `morsegraphs.txt`: `<id>\t<canonical form>` per line.
//! - `assignments.bin`: little-endian Morse graph ids, one per parameter.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::morse::{morse_graph, Annotation, MorseGraph, MorseShape};
use crate::network::RegulatoryNetwork;
use crate::parameter::{Parameter, ParameterGraph};
use crate::phase::{domain_graph, Labeling};

pub const FORMAT_HEADER: &str = "dsgrndb 1";
pub const ENGINE: &str = concat!("dsgrn-", env!("CARGO_PKG_VERSION"), "/domain-graph");
pub const CHUNK_SIZE: u64 = 4096;

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unsupported database format `{0}` (expected `dsgrndb 1`)")]
    FormatVersionMismatch(String),
    #[error("database content does not match its checksum")]
    ChecksumMismatch,
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error("malformed query: {0}")]
    MalformedQuery(String),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DatabaseError + '_ {
    move |source| DatabaseError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Annotated Morse graph of one parameter, computed from its domain graph.
pub fn parameter_morse_graph(graph: &ParameterGraph, parameter: &Parameter) -> MorseGraph {
    let labeling = Labeling::new(graph, parameter);
    let names: Vec<String> = graph
        .network()
        .nodes()
        .iter()
        .map(|n| n.name.clone())
        .collect();
    morse_graph(&domain_graph(&labeling), labeling.grid(), &names)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildInfo {
    pub build_time: u64,
    pub wall_clock_ms: u64,
    pub engine: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    network_text: String,
    morse_graphs: Vec<String>,
    shapes: Vec<MorseShape>,
    assignments: Vec<u32>,
    pub info: BuildInfo,
}

impl Database {
    /// Computes the Morse graph of every parameter with `workers` threads.
    /// The result does not depend on `workers`.
    pub fn build(graph: &ParameterGraph, workers: usize) -> Database {
        let start = Instant::now();
        let total = graph.size();
        let chunks = total.div_ceil(CHUNK_SIZE) as usize;
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<(Vec<String>, Vec<u32>)>>> = Mutex::new(vec![None; chunks]);
        std::thread::scope(|s| {
            for _ in 0..workers.max(1) {
                s.spawn(|| loop {
                    let chunk = next.fetch_add(1, Ordering::Relaxed);
                    if chunk >= chunks {
                        break;
                    }
                    let lo = chunk as u64 * CHUNK_SIZE;
                    let hi = (lo + CHUNK_SIZE).min(total);
                    let mut table: Vec<String> = Vec::new();
                    let mut seen: HashMap<String, u32> = HashMap::new();
                    let mut ids = Vec::with_capacity((hi - lo) as usize);
                    for index in lo..hi {
                        let p = graph.parameter(index).expect("index in range");
                        let key = parameter_morse_graph(graph, &p).canonical_form();
                        let id = *seen.entry(key.clone()).or_insert_with(|| {
                            table.push(key);
                            table.len() as u32 - 1
                        });
                        ids.push(id);
                    }
                    results.lock().unwrap()[chunk] = Some((table, ids));
                });
            }
        });
        let mut morse_graphs: Vec<String> = Vec::new();
        let mut global: HashMap<String, u32> = HashMap::new();
        let mut assignments = Vec::with_capacity(total as usize);
        for (table, ids) in results
            .into_inner()
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
        {
            let map: Vec<u32> = table
                .into_iter()
                .map(|key| {
                    *global.entry(key.clone()).or_insert_with(|| {
                        morse_graphs.push(key);
                        morse_graphs.len() as u32 - 1
                    })
                })
                .collect();
            // ids are local first-appearance order, so global ids stay in
            // first-appearance order too
            assignments.extend(ids.into_iter().map(|i| map[i as usize]));
        }
        let shapes = morse_graphs
            .iter()
            .map(|s| s.parse().expect("canonical form parses"))
            .collect();
        Database {
            network_text: graph.network().render(),
            morse_graphs,
            shapes,
            assignments,
            info: BuildInfo {
                build_time: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                wall_clock_ms: start.elapsed().as_millis() as u64,
                engine: ENGINE.to_string(),
            },
        }
    }

    pub fn network_text(&self) -> &str {
        &self.network_text
    }

    pub fn network(&self) -> RegulatoryNetwork {
        RegulatoryNetwork::parse(&self.network_text).expect("stored network is valid")
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn morse_graphs(&self) -> &[String] {
        &self.morse_graphs
    }

    pub fn shape(&self, id: u32) -> &MorseShape {
        &self.shapes[id as usize]
    }

    pub fn assignment(&self, index: u64) -> Option<u32> {
        self.assignments.get(index as usize).copied()
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    /// Number of parameters per Morse graph id.
    pub fn census(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.morse_graphs.len()];
        for &id in &self.assignments {
            counts[id as usize] += 1;
        }
        counts
    }

    /// Indices of all parameters whose Morse graph satisfies the query, in
    /// increasing order.
    pub fn query(&self, query: &Query) -> Vec<u64> {
        let matching: Vec<bool> = self.shapes.iter().map(|s| query.matches(s)).collect();
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &id)| matching[id as usize])
            .map(|(i, _)| i as u64)
            .collect()
    }

    fn content_files(&self) -> [(&'static str, Vec<u8>); 3] {
        let mut table = String::new();
        for (id, s) in self.morse_graphs.iter().enumerate() {
            table.push_str(&format!("{id}\t{s}\n"));
        }
        let mut bin = Vec::with_capacity(self.assignments.len() * 4);
        for id in &self.assignments {
            bin.extend_from_slice(&id.to_le_bytes());
        }
        [
            ("network.txt", self.network_text.as_bytes().to_vec()),
            ("morsegraphs.txt", table.into_bytes()),
            ("assignments.bin", bin),
        ]
    }

    fn checksum(files: &[(&str, Vec<u8>)]) -> String {
        let mut h = Sha256::new();
        for (name, bytes) in files {
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatabaseError> {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        let files = self.content_files();
        for (name, bytes) in &files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_error(&path))?;
        }
        let meta = format!(
            "{FORMAT_HEADER}\ntotal={}\nid_width=32\nbuild_time={}\nwall_clock_ms={}\nengine={}\nchecksum={}\n",
            self.assignments.len(),
            self.info.build_time,
            self.info.wall_clock_ms,
            self.info.engine,
            Self::checksum(&files)
        );
        let path = dir.join("meta.txt");
        fs::write(&path, meta).map_err(io_error(&path))
    }

    pub fn load(dir: &Path) -> Result<Database, DatabaseError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read(&path).map_err(io_error(&path))
        };
        let meta = String::from_utf8(read("meta.txt")?)
            .map_err(|_| DatabaseError::Corrupt("meta.txt is not UTF-8".into()))?;
        let mut lines = meta.lines();
        let header = lines.next().unwrap_or("");
        if header != FORMAT_HEADER {
            return Err(DatabaseError::FormatVersionMismatch(header.to_string()));
        }
        let fields: HashMap<&str, &str> = lines.filter_map(|l| l.split_once('=')).collect();
        let field = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| DatabaseError::Corrupt(format!("meta.txt lacks {k}")))
        };
        let number = |k: &str| -> Result<u64, DatabaseError> {
            field(k)?
                .parse()
                .map_err(|_| DatabaseError::Corrupt(format!("bad {k} in meta.txt")))
        };
        if number("id_width")? != 32 {
            return Err(DatabaseError::FormatVersionMismatch("id_width".into()));
        }
        let files = [
            ("network.txt", read("network.txt")?),
            ("morsegraphs.txt", read("morsegraphs.txt")?),
            ("assignments.bin", read("assignments.bin")?),
        ];
        if Self::checksum(&files) != field("checksum")? {
            return Err(DatabaseError::ChecksumMismatch);
        }
        let [(_, network), (_, table), (_, bin)] = files;
        let network_text = String::from_utf8(network)
            .map_err(|_| DatabaseError::Corrupt("network.txt is not UTF-8".into()))?;
        RegulatoryNetwork::parse(&network_text)
            .map_err(|e| DatabaseError::Corrupt(format!("network.txt: {e}")))?;
        let table = String::from_utf8(table)
            .map_err(|_| DatabaseError::Corrupt("morsegraphs.txt is not UTF-8".into()))?;
        let mut morse_graphs = Vec::new();
        let mut shapes = Vec::new();
        for (k, line) in table.lines().enumerate() {
            let (id, form) = line
                .split_once('\t')
                .ok_or_else(|| DatabaseError::Corrupt(format!("morsegraphs.txt line {}", k + 1)))?;
            if id.parse::<usize>().ok() != Some(k) {
                return Err(DatabaseError::Corrupt(format!("morsegraphs.txt id {id}")));
            }
            shapes.push(form.parse().map_err(DatabaseError::Corrupt)?);
            morse_graphs.push(form.to_string());
        }
        let assignments: Vec<u32> = bin
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if assignments.len() as u64 != number("total")? {
            return Err(DatabaseError::Corrupt(
                "assignment count differs from total".into(),
            ));
        }
        if assignments
            .iter()
            .any(|&id| id as usize >= morse_graphs.len())
        {
            return Err(DatabaseError::Corrupt(
                "assignment refers to unknown Morse graph".into(),
            ));
        }
        Ok(Database {
            network_text,
            morse_graphs,
            shapes,
            assignments,
            info: BuildInfo {
                build_time: number("build_time")?,
                wall_clock_ms: number("wall_clock_ms")?,
                engine: field("engine")?.to_string(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    fn holds(self, a: usize, b: usize) -> bool {
        match self {
            Comparison::Eq => a == b,
            Comparison::Ne => a != b,
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
        }
    }

    /// Splits `<op><number>` off the start of `s`.
    fn split(s: &str) -> Option<(Comparison, usize)> {
        let ops = [
            ("<=", Comparison::Le),
            (">=", Comparison::Ge),
            ("!=", Comparison::Ne),
            ("=", Comparison::Eq),
            ("<", Comparison::Lt),
            (">", Comparison::Gt),
        ];
        let (op, rest) = ops
            .iter()
            .find_map(|(t, op)| s.strip_prefix(t).map(|r| (*op, r)))?;
        Some((op, rest.parse().ok()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Any,
    Minimal,
    Maximal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    HasAnnotation {
        annotation: Annotation,
        position: Position,
    },
    NodeCount {
        op: Comparison,
        count: usize,
    },
    MinimalCount {
        prefix: String,
        op: Comparison,
        count: usize,
    },
}

impl Predicate {
    pub fn matches(&self, shape: &MorseShape) -> bool {
        match self {
            Predicate::HasAnnotation {
                annotation,
                position,
            } => {
                let nodes = match position {
                    Position::Any => (0..shape.len()).collect(),
                    Position::Minimal => shape.minimal(),
                    Position::Maximal => shape.maximal(),
                };
                nodes.iter().any(|&v| shape.annotations[v] == *annotation)
            }
            Predicate::NodeCount { op, count } => op.holds(shape.len(), *count),
            Predicate::MinimalCount { prefix, op, count } => {
                let n = shape
                    .minimal()
                    .iter()
                    .filter(|&&v| {
                        shape.annotations[v]
                            .to_string()
                            .starts_with(prefix.as_str())
                    })
                    .count();
                op.holds(n, *count)
            }
        }
    }
}

/// Conjunction of predicates, written as space-separated clauses:
/// `minimal:<ann>`, `maximal:<ann>`, `any:<ann>`, `nodes<op><k>` and
/// `minimal-count(<prefix>)<op><k>`, with `<op>` one of
/// `= != < <= > >=`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub predicates: Vec<Predicate>,
}

impl Query {
    pub fn matches(&self, shape: &MorseShape) -> bool {
        self.predicates.iter().all(|p| p.matches(shape))
    }
}

impl std::str::FromStr for Query {
    type Err = DatabaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |clause: &str| DatabaseError::MalformedQuery(format!("cannot parse `{clause}`"));
        let mut predicates = Vec::new();
        for clause in s.split_whitespace() {
            if clause.eq_ignore_ascii_case("and") {
                continue;
            }
            let predicate = if let Some(rest) = clause.strip_prefix("minimal-count(") {
                let (prefix, cmp) = rest.split_once(')').ok_or_else(|| bad(clause))?;
                let (op, count) = Comparison::split(cmp).ok_or_else(|| bad(clause))?;
                Predicate::MinimalCount {
                    prefix: prefix.to_string(),
                    op,
                    count,
                }
            } else if let Some(rest) = clause.strip_prefix("nodes") {
                let (op, count) = Comparison::split(rest).ok_or_else(|| bad(clause))?;
                Predicate::NodeCount { op, count }
            } else {
                let (position, ann) = clause.split_once(':').ok_or_else(|| bad(clause))?;
                let position = match position {
                    "minimal" => Position::Minimal,
                    "maximal" => Position::Maximal,
                    "any" => Position::Any,
                    _ => return Err(bad(clause)),
                };
                let annotation = ann.parse().map_err(|_| bad(clause))?;
                Predicate::HasAnnotation {
                    annotation,
                    position,
                }
            };
            predicates.push(predicate);
        }
        if predicates.is_empty() {
            return Err(DatabaseError::MalformedQuery("empty query".into()));
        }
        Ok(Query { predicates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorLibrary;

    fn pg(text: &str) -> ParameterGraph {
        ParameterGraph::new(
            RegulatoryNetwork::parse(text).unwrap(),
            &FactorLibrary::in_memory(),
        )
        .unwrap()
    }

    #[test]
    fn query_parsing() {
        let q: Query = "minimal:FC nodes=1".parse().unwrap();
        assert_eq!(q.predicates.len(), 2);
        let q: Query = "minimal-count(FP)>=2".parse().unwrap();
        assert_eq!(
            q.predicates[0],
            Predicate::MinimalCount {
                prefix: "FP".into(),
                op: Comparison::Ge,
                count: 2
            }
        );
        for bad in [
            "",
            "minimal:XYZ",
            "nodes~3",
            "sideways:FC",
            "minimal-count(FP",
        ] {
            assert!(
                matches!(bad.parse::<Query>(), Err(DatabaseError::MalformedQuery(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn predicates_on_shapes() {
        let s: MorseShape = "FC FP|0>1".parse().unwrap();
        let q = |t: &str| t.parse::<Query>().unwrap().matches(&s);
        assert!(q("minimal:FP"));
        assert!(!q("minimal:FC"));
        assert!(q("maximal:FC"));
        assert!(q("any:FC nodes=2"));
        assert!(q("minimal-count(FP)=1"));
        assert!(!q("nodes<2"));
    }

    #[test]
    fn repressilator_census() {
        let g = pg("x1 : ~x3\nx2 : ~x1\nx3 : ~x2");
        let db = Database::build(&g, 2);
        assert_eq!(db.len(), 27);
        let mut census: Vec<(String, u64)> =
            db.morse_graphs().iter().cloned().zip(db.census()).collect();
        census.sort();
        assert_eq!(
            census,
            vec![
                ("FC|".to_string(), 1),
                ("FP_OFF|".to_string(), 1),
                ("FP_ON|".to_string(), 1),
                ("FP|".to_string(), 24)
            ]
        );
    }

    #[test]
    fn save_load_round_trip() {
        let g = pg("x1 : ~x3\nx2 : ~x1\nx3 : ~x2");
        let db = Database::build(&g, 1);
        let dir = tempfile::tempdir().unwrap();
        db.save(dir.path()).unwrap();
        assert_eq!(Database::load(dir.path()).unwrap(), db);

        let bin = dir.path().join("assignments.bin");
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            Database::load(dir.path()),
            Err(DatabaseError::ChecksumMismatch)
        ));

        let meta = dir.path().join("meta.txt");
        let text = fs::read_to_string(&meta)
            .unwrap()
            .replace("dsgrndb 1", "dsgrndb 2");
        fs::write(&meta, text).unwrap();
        assert!(matches!(
            Database::load(dir.path()),
            Err(DatabaseError::FormatVersionMismatch(_))
        ));
    }
}
