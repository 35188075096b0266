#![no_main]

use libfuzzer_sys::fuzz_target;
use spade_bounds::{PointSpreadFunction, TabulatedPsf};

fuzz_target!(|data: &str| {
    // Accepted tables must also survive the overlap integrals.
    if let Ok(table) = TabulatedPsf::parse(data) {
        let psf = PointSpreadFunction::tabulated(table);
        let _ = psf.overlaps(0.5 * psf.width());
    }
});
