#![no_main]

use levelset::harness::config::{
    bpdn_config, convergence_config, echo_bpdn, echo_convergence, echo_image, echo_lowrank, image_config, lowrank_config,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    // Accepted configs must echo to text that parses to the same config.
    if let Ok(cfg) = bpdn_config(text) {
        assert_eq!(bpdn_config(&echo_bpdn(&cfg)).expect("echo parses"), cfg);
    }
    if let Ok(cfg) = convergence_config(text) {
        assert_eq!(convergence_config(&echo_convergence(&cfg)).expect("echo parses"), cfg);
    }
    if let Ok(cfg) = lowrank_config(text) {
        assert_eq!(lowrank_config(&echo_lowrank(&cfg)).expect("echo parses"), cfg);
    }
    if let Ok(cfg) = image_config(text) {
        assert_eq!(image_config(&echo_image(&cfg)).expect("echo parses"), cfg);
    }
});
