use std::io::{BufRead, Write};

use crate::seed;
use crate::table::{format_real, parse_int, parse_real, read_rows};
use crate::theory::{asymptotic_power, finite_power, QuadratureSpec, TheoryMode, TheoryParams};
use crate::{Error, Result};

pub const THEORY_GRID_HEADER: &str = "n,beta,mode,R,rho,gamma,alpha,power,se,mc_samples,seed";

/// Theoretical power at one `(n, rho)` and, for finite rows, one `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryGridRow {
    pub n: usize,
    pub beta: f64,
    pub mode: TheoryMode,
    pub r: Option<usize>,
    pub rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub power: f64,
    pub se: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

/// Finite-`R` power for every `(n, rho, R)` and the asymptotic power for
/// every `(n, rho)`, with `gamma = sqrt(n) beta`. Finite cells draw from
/// `derive(seed, [n, R, rho bits])`. Rows come per `n`, then per `rho`:
/// finite rows in increasing `R`, followed by the asymptotic row.
pub fn run_theory_grid(
    r_values: &[usize],
    rho_values: &[f64],
    n_values: &[usize],
    beta: f64,
    alpha: f64,
    quad: &QuadratureSpec,
    seed: u64,
) -> Result<Vec<TheoryGridRow>> {
    quad.validate()?;
    if r_values.is_empty() || rho_values.is_empty() || n_values.is_empty() {
        return Err(Error::invalid("grid", "every value set must be nonempty"));
    }
    let mut rs = r_values.to_vec();
    rs.sort();
    rs.dedup();
    let mut rows = Vec::new();
    for &n in n_values {
        for &rho in rho_values {
            let row = |mode, r, power, se, mc_samples, seed| TheoryGridRow {
                n,
                beta,
                mode,
                r,
                rho,
                gamma: (n as f64).sqrt() * beta,
                alpha,
                power,
                se,
                mc_samples,
                seed,
            };
            for &r in &rs {
                let params = TheoryParams::from_effect(n, beta, rho, r, alpha)?;
                let cell_seed = seed::derive(seed, &[n as u64, r as u64, rho.to_bits()]);
                let e = finite_power(&params, quad, cell_seed)?;
                rows.push(row(TheoryMode::Finite, Some(r), e.value, e.se, e.samples, cell_seed));
            }
            let params = TheoryParams::from_effect(n, beta, rho, rs[0], alpha)?;
            let p = asymptotic_power(&params, quad)?;
            rows.push(row(TheoryMode::Asymptotic, None, p, 0.0, 0, 0));
        }
    }
    Ok(rows)
}

pub fn write_theory_grid<W: Write>(rows: &[TheoryGridRow], mut out: W) -> Result<()> {
    writeln!(out, "{THEORY_GRID_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            format_real(r.beta),
            r.mode.name(),
            r.r.map(|r| r.to_string()).unwrap_or_default(),
            format_real(r.rho),
            format_real(r.gamma),
            format_real(r.alpha),
            format_real(r.power),
            format_real(r.se),
            r.mc_samples,
            r.seed
        )?;
    }
    Ok(())
}

pub fn read_theory_grid<R: BufRead>(reader: R) -> Result<Vec<TheoryGridRow>> {
    read_rows(reader, THEORY_GRID_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(TheoryGridRow {
                n: parse_int(&f[0], line)?,
                beta: parse_real(&f[1], line)?,
                mode: f[2].parse().map_err(|e: Error| Error::Parse {
                    line,
                    reason: e.to_string(),
                })?,
                r: if f[3].is_empty() { None } else { Some(parse_int(&f[3], line)?) },
                rho: parse_real(&f[4], line)?,
                gamma: parse_real(&f[5], line)?,
                alpha: parse_real(&f[6], line)?,
                power: parse_real(&f[7], line)?,
                se: parse_real(&f[8], line)?,
                mc_samples: parse_int(&f[9], line)?,
                seed: parse_int(&f[10], line)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vec<TheoryGridRow> {
        let quad = QuadratureSpec::with_mc(40_000).unwrap();
        run_theory_grid(&[100, 10, 30], &[0.0, 0.3], &[26], 0.25, 0.05, &quad, 5).unwrap()
    }

    #[test]
    fn layout_and_gamma() {
        let rows = small();
        assert_eq!(rows.len(), 2 * 4);
        assert!((rows[0].gamma - 1.2747548783981961).abs() < 1e-15);
        let rs: Vec<Option<usize>> = rows[..4].iter().map(|r| r.r).collect();
        assert_eq!(rs, [Some(10), Some(30), Some(100), None]);
        assert_eq!(rows[3].mode, TheoryMode::Asymptotic);
    }

    #[test]
    fn monotone_in_r_and_rho() {
        let rows = small();
        for block in rows.chunks(4) {
            for w in block[..3].windows(2) {
                let tol = 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
                assert!(w[1].power >= w[0].power - tol);
            }
            assert!(block[3].power >= block[2].power - 3.0 * block[2].se);
        }
        for k in 0..4 {
            let (a, b) = (&rows[k], &rows[k + 4]);
            assert!(b.power <= a.power + 2.0 * (a.se.powi(2) + b.se.powi(2)).sqrt());
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = small();
        let mut buf = Vec::new();
        write_theory_grid(&rows, &mut buf).unwrap();
        assert_eq!(read_theory_grid(buf.as_slice()).unwrap(), rows);
    }
}
