//! Regenerates `data/default_coefficients.json` from the reference estimates.

use chaosnet::dse::{calibrate_table, read_measurements, REFERENCE_ESTIMATES};

fn main() {
    let records = read_measurements(REFERENCE_ESTIMATES.as_bytes()).expect("reference CSV parses");
    let table = calibrate_table(
        &records,
        "calibrated against data/reference_estimates.csv (3-4-3, 3-8-3, 3-16-3 networks); \
         LUT levels use the fixed-I reduced fit",
    )
    .expect("reference data calibrates");
    print!("{}", table.to_json());
}
