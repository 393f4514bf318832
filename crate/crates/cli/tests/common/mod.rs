//! Fixtures and process helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use latentscope_core::table::{EmbeddingSet, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BIN: &str = env!("CARGO_BIN_EXE_latentscope");

pub fn cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN).args(args).output().expect("run latentscope")
}

/// Runs the binary and returns stdout, panicking with stderr on failure.
pub fn cli_ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = cli(args);
    assert!(
        out.status.success(),
        "latentscope failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Embeddings that are an affine image of 2-D latent factors plus a little
/// isotropic noise, and features that are affine in the same factors.
pub struct Planted {
    pub embeddings: EmbeddingSet,
    pub features: FeatureTable,
    /// `dim × 2` map from factors to embedding space.
    pub mixing: Vec<[f64; 2]>,
    /// Per-feature factor weights.
    pub weights: Vec<[f64; 2]>,
    /// Per-feature noise-free values, row order of `features`.
    pub clean: Vec<Vec<f64>>,
}

pub fn planted(n: usize, dim: usize, n_features: usize, feature_noise: f64, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // two orthogonal directions with distinct spreads
    let mut u: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= nu);
    let mut v: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(x, y)| *x -= d * y);
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mixing: Vec<[f64; 2]> = (0..dim).map(|k| [3.0 * u[k], 1.5 * v[k]]).collect();
    let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();

    let z: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let vectors: Vec<Vec<f64>> = z
        .iter()
        .map(|z| {
            (0..dim)
                .map(|k| offset[k] + mixing[k][0] * z[0] + mixing[k][1] * z[1] + 0.05 * normal(&mut rng))
                .collect()
        })
        .collect();
    let weights: Vec<[f64; 2]> = (0..n_features)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let norm = rng.random_range(0.5..2.0);
            [norm * angle.cos(), norm * angle.sin()]
        })
        .collect();
    let bias: Vec<f64> = (0..n_features).map(|_| rng.random_range(-5.0..5.0)).collect();
    let clean: Vec<Vec<f64>> = (0..n_features)
        .map(|j| z.iter().map(|z| weights[j][0] * z[0] + weights[j][1] * z[1] + bias[j]).collect())
        .collect();
    let ids: Vec<String> = (0..n).map(|i| format!("utt{i:04}")).collect();
    let rows = (0..n)
        .map(|i| (0..n_features).map(|j| Some(clean[j][i] + feature_noise * normal(&mut rng))).collect())
        .collect();
    Planted {
        embeddings: EmbeddingSet::new(ids.clone(), vectors).unwrap(),
        features: FeatureTable::new(ids, (0..n_features).map(|j| format!("feat{j:02}")).collect(), rows).unwrap(),
        mixing,
        weights,
        clean,
    }
}

pub fn naive_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// A `serve` child process; killed on drop.
pub struct ServeProc {
    pub child: Child,
    pub base: String,
}

impl ServeProc {
    pub fn start(manifest: &Path, log: &Path, key: &str, extra: &[&str]) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--port", "0", "--admin-key", key, "--manifest"])
            .arg(manifest)
            .arg("--log")
            .arg(log)
            .args(extra)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}"));
        ServeProc { child, base: addr.to_string() }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// SIGKILL, no chance to flush anything.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for ServeProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn tempdir() -> (tempfile::TempDir, PathBuf) {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().to_path_buf();
    (d, p)
}
