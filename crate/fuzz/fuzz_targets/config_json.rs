#![no_main]
use bathyflow::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RunConfig::from_json(data) {
        let text = cfg.to_json().expect("a parsed config serializes");
        let back = RunConfig::from_json(&text).expect("serialized config parses");
        assert_eq!(back.to_json().unwrap(), text);
        let _ = cfg.checked(None);
    }
});
