//! `--config` files: a flat [`KeyValues`] file whose keys mirror the long
//! flag names with `-` replaced by `_`. Flags given on the command line win.

use mon_core::{Dims, SynthConfig};

use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Parses an extent written as `HxW` (or a single `N` for `NxN`).
pub fn parse_extent(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |p: &str| {
        p.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected HxW, got {s:?}"))
    };
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

/// Overlays config-file values onto `cfg`.
pub fn apply_synth(kv: &KeyValues, mut cfg: SynthConfig) -> Result<SynthConfig> {
    let mut dims = cfg.dims;
    if let Some(v) = kv.get_parsed("height")? {
        dims.height = v;
    }
    if let Some(v) = kv.get_parsed("width")? {
        dims.width = v;
    }
    if let Some(v) = kv.get_parsed("channels")? {
        dims.channels = v;
    }
    cfg.dims = Dims::new(dims.height, dims.width, dims.channels);
    if let Some(v) = kv.get_parsed("n_mon")? {
        cfg.n_normal_mon = v;
    }
    if let Some(v) = kv.get_parsed("n_eval")? {
        cfg.n_normal_eval = v;
    }
    if let Some(v) = kv.get_parsed("n_anomalous")? {
        cfg.n_anomalous = v;
    }
    if let Some(v) = kv.get_parsed("sigma")? {
        cfg.noise_sigma = v;
    }
    if let Some(v) = kv.get_parsed("amplitude")? {
        cfg.bump_amplitude = v;
    }
    if let Some(v) = kv.get("extent") {
        cfg.bump_extent = parse_extent(v).map_err(|message| Error::BadValue {
            key: "extent".into(),
            value: v.into(),
            message,
        })?;
    }
    if let Some(v) = kv.get_parsed("seed")? {
        cfg.seed = v;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn overlay() {
        let kv =
            KeyValues::parse("height=4\nextent=2x1\nseed=9\nsigma=0.5\n", Path::new("c")).unwrap();
        let cfg = apply_synth(&kv, SynthConfig::default()).unwrap();
        assert_eq!(cfg.dims, Dims::new(4, 14, 192));
        assert_eq!(cfg.bump_extent, (2, 1));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.noise_sigma, 0.5);
        assert_eq!(cfg.n_normal_mon, 64);
    }

    #[test]
    fn extent_forms() {
        assert_eq!(parse_extent("3x3"), Ok((3, 3)));
        assert_eq!(parse_extent("5"), Ok((5, 5)));
        assert!(parse_extent("3x").is_err());
    }

    #[test]
    fn bad_value() {
        let kv = KeyValues::parse("n_mon=many\n", Path::new("c")).unwrap();
        assert!(matches!(
            apply_synth(&kv, SynthConfig::default()),
            Err(Error::BadValue { .. })
        ));
    }
}
