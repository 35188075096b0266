#![no_main]

use libfuzzer_sys::fuzz_target;
use spade_bounds::config::ExperimentConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = ExperimentConfig::parse(data) {
        let _ = cfg.figures();
    }
});
