//! Regenerates the CSV fixtures in `fixtures/`.
//!
//! Values are sampled once per calendar year from the preset scenarios and
//! rounded to the precision a reading of the published charts supports.

use std::path::Path;

use plc_core::io::write_table;
use plc_core::scenario::PlcParams;
use plc_core::Result;

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn write(
    dir: &Path,
    file: &str,
    t0: f64,
    values: &[f64],
    step: f64,
    decimals: usize,
) -> Result<()> {
    let rows = values.iter().enumerate().map(|(i, v)| {
        vec![
            format!("{}", t0 + i as f64),
            format!("{:.*}", decimals, round_to(*v, step)),
        ]
    });
    write_table(dir.join(file), &["t", "value"], rows)
}

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, years, pen, price, sales) in [
        ("bw_tv", 32usize, true, true, false),
        ("colour_tv", 36, true, true, false),
        ("c_class", 40, false, false, true),
        ("s_class", 45, false, false, true),
    ] {
        let p = PlcParams::preset(name).expect("preset");
        let c = p.assemble_n(1.0, years + 1)?;
        if pen {
            write(
                &dir,
                &format!("{name}_penetration.csv"),
                p.t0,
                &c.penetration.values,
                0.01,
                2,
            )?;
        }
        if price {
            let index: Vec<f64> = c.relative_price.values.iter().map(|r| 100.0 * r).collect();
            write(&dir, &format!("{name}_price.csv"), p.t0, &index, 0.1, 1)?;
        }
        if sales {
            let units: Vec<f64> = c
                .total
                .values
                .iter()
                .map(|s| s * p.market_potential)
                .collect();
            write(&dir, &format!("{name}_sales.csv"), p.t0, &units, 100.0, 0)?;
        }
    }
    Ok(())
}
