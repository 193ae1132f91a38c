#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tempfile::TempDir;

/// Files shared by the CLI tests.
pub struct Fixtures {
    dir: TempDir,
}

fn bits(v: &[u8]) -> String {
    v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

/// Deterministic pseudo-random bits, independent of any library RNG.
fn lcg_bits(seed: u64, len: usize) -> Vec<u8> {
    let mut s = seed;
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 63) as u8
        })
        .collect()
}

pub const INSTANCE_LINEAR: &str = r#"{
  "gamma": 0.1,
  "C": 1,
  "degree_bound": 2,
  "degrees": [1],
  "depths": [0],
  "gamma_table": [
    {"atom": ["0/2^1"], "value": 0.0},
    {"atom": ["1/2^1"], "value": 1.0}
  ]
}
"#;

impl Fixtures {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let f = Fixtures { dir };
        f.write("one.fpfn", "fpfn 1 2 2 boolean\n1 1 1 1\n");
        f.write("quad.fpfn", "fpfn 1 2 2 boolean\n0 0 0 1\n");
        f.write("quarter.fpfn", "fpfn 1 2 1 torus\n0 1/4\n");
        f.write("x1.fpfn", "fpfn 1 2 2 boolean\n0 1 0 1\n");
        f.write("zero2.fpfn", "fpfn 1 2 2 signed\n0 0 0 0\n");
        f.write("x1unit.fpfn", "fpfn 1 2 2 unit\n0 1 0 1\n");
        f.write("rand6.fpfn", &format!("fpfn 1 2 6 boolean\n{}\n", bits(&lcg_bits(6, 64))));
        f.write("half6.fpfn", &format!("fpfn 1 2 6 unit\n{}\n", vec!["0.5"; 64].join(" ")));
        let mut x1_8 = String::from("fpfn 1 2 8 boolean\n");
        x1_8.push_str(&bits(&(0..256).map(|i| (i & 1) as u8).collect::<Vec<_>>()));
        x1_8.push('\n');
        f.write("x1_8.fpfn", &x1_8);
        f.write("linear.json", INSTANCE_LINEAR);
        f.write("bad_header.fpfn", "fpfn 9 2 1 boolean\n0 1\n");
        f.write("short.fpfn", "fpfn 1 2 2 boolean\n0 1 0\n");
        f.write("bad_value.fpfn", "fpfn 1 2 1 boolean\n0 7\n");
        f.write("bad.json", "{\"gamma\": 0.1");
        f
    }

    pub fn write(&self, name: &str, text: &str) {
        std::fs::write(self.dir.path().join(name), text).expect("write fixture");
    }

    pub fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// The regression suite: one invocation per documented example.
    pub fn suite(&self) -> Vec<Vec<String>> {
        let p = |n: &str| self.path(n);
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let quad = "1 * x1^1*x2^1 / 2";
        vec![
            s(&["gowers", "--fn", &p("one.fpfn"), "--order", "2", "--mode", "exact"]),
            s(&["gowers", "--fn", &p("quad.fpfn"), "--order", "2", "--mode", "monte-carlo", "--samples", "20000", "--seed", "3"]),
            s(&["norms", "--fn", &p("x1.fpfn")]),
            s(&["poly-eval", "--p", "2", "--n", "2", "--poly", quad]),
            s(&["poly-eval", "--p", "2", "--n", "1", "--poly", "1 * x1^1 / 4", "--point", "1"]),
            s(&["poly-fit", "--fn", &p("quarter.fpfn")]),
            s(&["atoms", "--p", "2", "--n", "1", "--poly", "1 * x1^1 / 4"]),
            s(&["rank", "--p", "2", "--n", "2", "--poly", quad, "--degree", "2"]),
            s(&["rank", "--p", "2", "--n", "2", "--poly", "1 * x1^1 / 2", "--poly", "1 * x1^1 / 2"]),
            s(&["depset", "--p", "2", "--form", "1,0", "--form", "0,1", "--form", "1,1", "--degree", "1", "--depth", "0"]),
            s(&["consistent", "--p", "2", "--form", "1,0", "--form", "0,1", "--form", "1,1", "--degrees", "1", "--depths", "0"]),
            s(&["equidist", "--p", "2", "--n", "3", "--poly", "1 * x1^1 / 2", "--form", "1,0", "--form", "0,1", "--form", "1,1"]),
            s(&["mu", "--fn", &p("x1.fpfn"), "--m", "1"]),
            s(&["mu", "--fn", &p("half6.fpfn"), "--m", "1", "--mode", "empirical", "--samples", "500", "--seed", "4"]),
            s(&["mu-instance", "--instance", &p("linear.json"), "--m", "1"]),
            s(&["tv", "--left", &format!("fn:{}", p("x1.fpfn")), "--right", &format!("instance:{}", p("linear.json")), "--m", "1"]),
            s(&["perturb", "--fn", &p("rand6.fpfn"), "--target", &p("half6.fpfn"), "--delta", "0.1", "--seed", "5"]),
            s(&["test-degree", "--fn", &p("quad.fpfn"), "--degree", "1", "--reps", "100", "--seed", "7"]),
            s(&[
                "test-instance", "--fn", &p("rand6.fpfn"), "--instance", &p("linear.json"), "--epsilon", "0.2", "--delta", "0.1",
                "--m", "2", "--trials", "3", "--seed", "9",
            ]),
            s(&["test-family", "--fn", &p("rand6.fpfn"), "--low-degree", "1", "--degree-bound", "2", "--epsilon", "0.2", "--m", "2", "--reps", "3", "--seed", "9"]),
            s(&[
                "validate-decomp", "--fn", &p("x1.fpfn"), "--f1", &p("x1unit.fpfn"), "--f2", &p("zero2.fpfn"), "--f3",
                &p("zero2.fpfn"), "--p", "2", "--n", "2", "--poly", "1 * x1^1 / 2", "--degree", "2", "--zeta", "0.1", "--eta", "0.1",
            ]),
            s(&[
                "report-embedding-stability", "--p", "2", "--n", "4", "--poly", "1 * x1^1 / 2", "--m", "2", "--mode", "empirical",
                "--trials", "100", "--seed", "2",
            ]),
        ]
    }
}

pub fn run(args: &[String]) -> (i32, String) {
    let mut argv = vec!["hofa".to_string()];
    argv.extend_from_slice(args);
    hofa_cli::run(&argv)
}

pub fn run_str(args: &[&str]) -> (i32, String) {
    run(&args.iter().map(|s| s.to_string()).collect::<Vec<_>>())
}

pub fn json(out: &str) -> serde_json::Value {
    serde_json::from_str(out).unwrap_or_else(|e| panic!("not JSON ({e}): {out}"))
}
