//! Frozen preset priors still hit their corner median targets.

use nbcd_core::sampler::run_chain;
use nbcd_core::GibbsConfig;
use nbcd_sim::{preset, PresetName};

#[test]
fn corner_medians_match_targets() {
    for (name, lo, hi) in [(PresetName::Study1, 0.04, 0.34), (PresetName::Study2, 0.05, 0.5), (PresetName::Trial, 0.05, 0.3)] {
        let p = preset(name);
        for seed in 0..3 {
            let post = run_chain(&p.prior, p.dims, &GibbsConfig { seed, ..GibbsConfig::default() }, None).unwrap();
            let m = post.medians();
            let (first, last) = (m[0], m[m.len() - 1]);
            assert!((first - lo).abs() < 0.01, "{}: first corner {first}", name.as_str());
            assert!((last - hi).abs() < 0.01, "{}: last corner {last}", name.as_str());
        }
    }
}
