#![no_main]

use libfuzzer_sys::fuzz_target;

// The CSV panel loader must reject arbitrary input gracefully, and any panel
// it accepts must satisfy the bar invariants and survive a save/load
// round trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(panel) = triplei_core::market::load_panel_reader(data) {
        for s in 0..panel.n_stocks() {
            for t in 0..panel.n_days() {
                if let Some(bar) = panel.bar(s, t) {
                    bar.validate().expect("accepted bars satisfy invariants");
                }
            }
        }
        let mut out = Vec::new();
        triplei_core::market::save_panel(&panel, &mut out).unwrap();
        let reloaded = triplei_core::market::load_panel_reader(out.as_slice())
            .expect("saved panels reload");
        assert_eq!(panel, reloaded);
    }
});
