use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn networks() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../networks")
}

fn net(name: &str) -> String {
    networks().join(name).display().to_string()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

struct Cli {
    cache: TempDir,
}

impl Cli {
    fn new() -> Self {
        Cli {
            cache: tempfile::tempdir().unwrap(),
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dsgrn"))
            .args(args)
            .env("DSGRN_CACHE", self.cache.path())
            .output()
            .unwrap()
    }

    fn stdout(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn error(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "single-line error: {err}");
        err
    }
}

#[test]
fn size_reports_factor_sizes_and_total() {
    let cli = Cli::new();
    assert_eq!(
        cli.stdout(&["size", &net("repressilator.txt")]),
        golden("size_repressilator.txt")
    );
    assert_eq!(
        cli.stdout(&["size", &net("repressilator.txt")]),
        "3 3 3 | total 27\n"
    );
    assert_eq!(
        cli.stdout(&["--format", "machine", "size", &net("bistable.txt")]),
        golden("size_bistable.machine")
    );
}

#[test]
fn validate_prints_signatures() {
    let cli = Cli::new();
    assert_eq!(
        cli.stdout(&["validate", &net("p53.txt")]),
        golden("validate_p53.txt")
    );
    assert_eq!(
        cli.stdout(&["--format", "machine", "validate", &net("p53.txt")]),
        golden("validate_p53.machine")
    );
}

#[test]
fn inspect_views() {
    let cli = Cli::new();
    let bi = net("bistable.txt");
    assert_eq!(
        cli.stdout(&["inspect", &bi, "-p", "115"]),
        golden("inspect_bistable_115.txt")
    );
    assert_eq!(
        cli.stdout(&["--format", "machine", "inspect", &bi, "-p", "115"]),
        golden("inspect_bistable_115.machine")
    );
    assert_eq!(
        cli.stdout(&["inspect", &bi, "-p", "115", "--inequalities"]),
        golden("inequalities_bistable_115.txt")
    );
    assert_eq!(
        cli.stdout(&[
            "--format",
            "machine",
            "inspect",
            &bi,
            "-p",
            "115",
            "--inequalities"
        ]),
        golden("inequalities_bistable_115.machine")
    );
    assert_eq!(
        cli.stdout(&["inspect", &bi, "-p", "0", "--morsegraph"]),
        golden("morsegraph_bistable_0.txt")
    );
    assert_eq!(
        cli.stdout(&[
            "inspect",
            &net("repressilator.txt"),
            "-p",
            "13",
            "--domaingraph"
        ]),
        golden("domaingraph_repressilator_13.txt")
    );
}

#[test]
fn sample_prints_witness() {
    let cli = Cli::new();
    assert_eq!(
        cli.stdout(&[
            "--format",
            "machine",
            "sample",
            &net("bistable.txt"),
            "-p",
            "115"
        ]),
        golden("sample_bistable_115.machine")
    );
    let text = cli.stdout(&["sample", &net("bistable.txt"), "-p", "115"]);
    assert!(text.lines().any(|l| l == "θ_{2,1} = 3"));
}

#[test]
fn build_query_and_inspect_database() {
    let cli = Cli::new();
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("bi.db");
    let db = db.to_str().unwrap();
    let built = cli.stdout(&[
        "--format",
        "machine",
        "build",
        &net("bistable.txt"),
        "-o",
        db,
        "-j",
        "2",
    ]);
    assert!(built.starts_with("total=216\nmorse_graphs=7\n"));
    assert_eq!(
        cli.stdout(&["query", db, "-q", "minimal-count(FP)>=2", "--count"]),
        "count 22\n"
    );
    let fc = cli.stdout(&[
        "--format",
        "machine",
        "query",
        db,
        "-q",
        "minimal:FC and nodes=1",
    ]);
    assert!(fc.lines().any(|l| l == "index=115"));
    assert!(fc.ends_with("count=6\n"));
    // a database directory and the network give the same inspection
    assert_eq!(
        cli.stdout(&["inspect", db, "-p", "115"]),
        cli.stdout(&["inspect", &net("bistable.txt"), "-p", "115"])
    );
    assert_eq!(
        cli.stdout(&[
            "--format",
            "machine",
            "inspect",
            db,
            "-p",
            "115",
            "--morsegraph"
        ]),
        "morsegraph=FC|\n"
    );
}

#[test]
fn build_is_independent_of_jobs() {
    let cli = Cli::new();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli.stdout(&[
        "build",
        &net("bistable.txt"),
        "-o",
        a.to_str().unwrap(),
        "-j",
        "1",
    ]);
    cli.stdout(&[
        "build",
        &net("bistable.txt"),
        "-o",
        b.to_str().unwrap(),
        "-j",
        "4",
    ]);
    for file in ["network.txt", "morsegraphs.txt", "assignments.bin"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let stable = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("meta.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("build_time=") && !l.starts_with("wall_clock_ms="))
            .map(String::from)
            .collect()
    };
    assert_eq!(stable(&a), stable(&b));
}

#[test]
fn simulate_writes_csv_and_verdict() {
    let cli = Cli::new();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let verdict = cli.stdout(&[
        "simulate",
        &net("repressilator.txt"),
        "-p",
        "13",
        "-n",
        "9",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(verdict, "oscillation: yes\n");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x_x1,x_x2,x_x3"));
    assert_eq!(text.lines().count(), 50_002);

    let out = cli.run(&[
        "--format",
        "machine",
        "simulate",
        &net("repressilator.txt"),
        "-p",
        "13",
        "-n",
        "9",
        "-T",
        "1",
        "-h",
        "0.5",
        "--x0",
        "1.2,1.0,0.8",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 4);
    assert!(stdout
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0.000000,1.200000000,1.000000000,0.800000000"));
    assert_eq!(
        String::from_utf8(out.stderr).unwrap(),
        "oscillation=false\n"
    );
}

#[test]
fn errors_are_single_coded_lines() {
    let cli = Cli::new();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "x : ~x\n").unwrap();
    assert!(cli
        .error(&["validate", bad.to_str().unwrap()])
        .starts_with("error[RepressingSelfEdge]: "));
    std::fs::write(&bad, "x : y\n").unwrap();
    assert!(cli
        .error(&["size", bad.to_str().unwrap()])
        .starts_with("error[UnknownIdentifier]: "));
    assert!(cli
        .error(&["size", "/nonexistent/net.txt"])
        .starts_with("error[IoError]: "));
    assert!(cli
        .error(&["inspect", &net("repressilator.txt"), "-p", "27"])
        .starts_with("error[IndexOutOfRange]: "));
    assert!(cli
        .error(&[
            "simulate",
            &net("repressilator.txt"),
            "-p",
            "0",
            "-n",
            "9",
            "--x0",
            "1,2"
        ])
        .starts_with("error[ArityMismatch]: "));

    let db = dir.path().join("db");
    cli.stdout(&[
        "build",
        &net("repressilator.txt"),
        "-o",
        db.to_str().unwrap(),
    ]);
    assert!(cli
        .error(&["query", db.to_str().unwrap(), "-q", "bogus"])
        .starts_with("error[MalformedQuery]: "));
    let assignments = db.join("assignments.bin");
    let bytes = std::fs::read(&assignments).unwrap();
    std::fs::write(&assignments, &bytes[..bytes.len() - 4]).unwrap();
    let err = cli.error(&["query", db.to_str().unwrap(), "-q", "minimal:FC"]);
    assert!(err.starts_with("error[ChecksumMismatch]: "), "{err}");
}

#[test]
fn p53_size() {
    let cli = Cli::new();
    assert_eq!(
        cli.stdout(&["size", &net("p53.txt")]),
        "310 12 6 12 3 | total 803520\n"
    );
}
