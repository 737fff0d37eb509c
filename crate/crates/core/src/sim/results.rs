use std::io::{BufRead, Write};

use crate::randtest::{PowerResult, POWER_HEADER};
use crate::table::{parse_int, parse_real, read_rows};
use crate::{Error, Result};

/// `panel` followed by the power columns.
pub const RESULTS_HEADER: &str =
    "panel,design,n,R,beta,beta_x,alpha,power,se,n_designs,n_z,mean_abs_r,mean_abs_Bx,seed";

/// Chart panel of a result, e.g. `beta_x=1/n=26`.
pub fn panel_key(beta_x: f64, n: usize) -> String {
    format!("beta_x={beta_x}/n={n}")
}

pub fn write_results<W: Write>(results: &[PowerResult], mut out: W) -> Result<()> {
    debug_assert_eq!(RESULTS_HEADER, format!("panel,{POWER_HEADER}"));
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(out, "{},{}", panel_key(r.beta_x, r.n), r.csv_fields())?;
    }
    Ok(())
}

pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<PowerResult>> {
    read_rows(reader, RESULTS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let r = PowerResult {
                design: f[1].parse().map_err(|e: Error| Error::Parse {
                    line,
                    reason: e.to_string(),
                })?,
                n: parse_int(&f[2], line)?,
                r: parse_int(&f[3], line)?,
                beta: parse_real(&f[4], line)?,
                beta_x: parse_real(&f[5], line)?,
                alpha: parse_real(&f[6], line)?,
                power: parse_real(&f[7], line)?,
                se: parse_real(&f[8], line)?,
                n_designs: parse_int(&f[9], line)?,
                n_z: parse_int(&f[10], line)?,
                mean_abs_r: parse_real(&f[11], line)?,
                mean_abs_bx: parse_real(&f[12], line)?,
                seed: parse_int(&f[13], line)?,
            };
            if f[0] != panel_key(r.beta_x, r.n) {
                return Err(Error::Parse {
                    line,
                    reason: format!("panel {:?} does not match beta_x and n", f[0]),
                });
            }
            Ok(r)
        })
        .collect()
}
