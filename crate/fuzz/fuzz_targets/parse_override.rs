#![no_main]

use libfuzzer_sys::fuzz_target;
use maxent_core::config::{parse_override, RunConfig, Subcommand};

const SUBCOMMANDS: [Subcommand; 5] = [
    Subcommand::Solve,
    Subcommand::Slater,
    Subcommand::Discrete,
    Subcommand::Closure,
    Subcommand::Mdp,
];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let active = SUBCOMMANDS[selector as usize % SUBCOMMANDS.len()];
    if let Ok(ov) = parse_override(text, active) {
        let mut cfg = RunConfig::default();
        let _ = cfg.apply(&ov);
    }
});
