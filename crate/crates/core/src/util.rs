//! Small numeric helpers shared across modules.

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    }
    x
}

/// `n` evenly spaced values from `lo` to `hi` inclusive. `n == 1` yields `[lo]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// splitmix64 step; used to derive independent sub-seeds from one master seed
/// so that stages and parallel units get decorrelated, reproducible streams.
pub fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
}

/// Finalize a splitmix64 state into an output word.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed: mixes a master seed with a stream index.
pub fn sub_seed(master: u64, stream: u64) -> u64 {
    let mut s = master;
    for _ in 0..=(stream % 4) {
        splitmix64(&mut s);
    }
    splitmix64_mix(s ^ stream.wrapping_mul(0xA24BAED4963EE407))
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (ddof = 1); 0 for fewer than two samples.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Euclidean norm of a 2-vector.
pub fn hypot2(x: f64, y: f64) -> f64 {
    (x * x + y * y).sqrt()
}

/// Parse a `key: value` plain-text config (UTF-8). Blank lines and lines
/// starting with `#` are ignored; keys are trimmed; duplicate keys keep the
/// last value.
pub fn parse_kv(text: &str) -> crate::Result<std::collections::BTreeMap<String, String>> {
    let mut out = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| crate::Error::parse(format!("line {}: expected `key: value`, got {:?}", lineno + 1, raw)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Fetch and parse one numeric key from a parsed kv map.
pub fn kv_f64(map: &std::collections::BTreeMap<String, String>, key: &str) -> crate::Result<f64> {
    let raw = map
        .get(key)
        .ok_or_else(|| crate::Error::parse(format!("missing key {key:?}")))?;
    raw.parse::<f64>()
        .map_err(|e| crate::Error::parse(format!("key {key:?}: {e}")))
}
