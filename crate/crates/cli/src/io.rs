//! File and signal plumbing shared by the subcommands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bnn_core::{CharacterTable, FiniteAbelianGroup, NetworkWeights, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Reads a signal file: comma- or whitespace-separated floats, with
/// `#` comments. N values make a real signal, 2N values interleaved
/// re,im pairs.
pub fn read_signal(path: &Path, n: usize) -> Result<Vec<C64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read signal file {}", path.display()))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split([',', ' ', '\t']) {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            let v: f64 = tok
                .parse()
                .with_context(|| format!("{}: `{tok}` is not a float", path.display()))?;
            values.push(v);
        }
    }
    if values.len() == n {
        Ok(values.into_iter().map(|v| C64::new(v, 0.0)).collect())
    } else if values.len() == 2 * n {
        Ok(values.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
    } else {
        bail!(
            "{}: found {} values, expected {n} (real) or {} (re,im pairs) for this group",
            path.display(),
            values.len(),
            2 * n
        );
    }
}

/// Loads weights from a file, or builds the character-table layer when
/// `src` is the literal `analytic`.
pub fn load_weights(src: &str, group: &FiniteAbelianGroup) -> Result<NetworkWeights> {
    let w = if src == "analytic" {
        NetworkWeights::analytic(&CharacterTable::new(group))
    } else {
        NetworkWeights::load(Path::new(src))
            .with_context(|| format!("cannot load weights from {src}"))?
    };
    if w.dims() != group.order() {
        bail!("weight matrix is {0}x{0} but {group} has order {1}", w.dims(), group.order());
    }
    Ok(w)
}

/// Draws a real signal whose transform coefficients all exceed 1e-3 in
/// magnitude, the regime where the bispectrum pins down the orbit.
pub fn generic_real_target(group: &FiniteAbelianGroup, seed: u64) -> Vec<C64> {
    let table = CharacterTable::new(group);
    let n = group.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x: Vec<C64> =
            (0..n).map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect();
        let fx = table.gft(&x).expect("length matches the table");
        if fx.iter().all(|v| v.norm() > 1e-3) {
            return x;
        }
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
/// Returns whether a file was written.
pub fn emit(out: Option<&Path>, text: &str) -> Result<bool> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(true)
        }
        None => {
            print!("{text}");
            Ok(false)
        }
    }
}
