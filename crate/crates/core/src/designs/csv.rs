//! `strategy,seed,threshold,row,entries`, one line per allocation. The
//! threshold field is empty when the design has none.

use std::io::{BufRead, Write};

use super::{DesignSet, Strategy};
use crate::alloc::AllocationVector;
use crate::table::{format_real, parse_int, parse_real, read_rows};
use crate::{Error, Result};

pub const DESIGN_HEADER: &str = "strategy,seed,threshold,row,entries";

impl DesignSet {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DESIGN_HEADER}")?;
        let threshold = self.threshold.map(format_real).unwrap_or_default();
        for (row, w) in self.allocations.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.strategy,
                self.seed,
                threshold,
                row,
                w.to_sign_string()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<DesignSet> {
        let rows = read_rows(input, DESIGN_HEADER)?;
        let Some((_, first)) = rows.first() else {
            return Err(Error::NoData("design CSV has no rows".into()));
        };
        let strategy: Strategy = first[0].parse()?;
        let seed: u64 = parse_int(&first[1], 2)?;
        let threshold_field = first[2].clone();
        let threshold = if threshold_field.is_empty() {
            None
        } else {
            Some(parse_real(&threshold_field, 2)?)
        };
        let mut allocations = Vec::with_capacity(rows.len());
        for (expected, (line, f)) in rows.iter().enumerate() {
            let parse_err = |reason: String| Error::Parse { line: *line, reason };
            if f[0] != first[0] || f[1] != first[1] || f[2] != threshold_field {
                return Err(parse_err("strategy, seed and threshold must match row 0".into()));
            }
            let row: usize = parse_int(&f[3], *line)?;
            if row != expected {
                return Err(parse_err(format!("expected row {expected}, found {row}")));
            }
            let w = AllocationVector::parse_signs(&f[4])
                .map_err(|e| parse_err(format!("bad allocation: {e}")))?;
            allocations.push(w);
        }
        DesignSet::from_allocations(strategy, allocations, threshold, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::normal_quantile_covariate;
    use crate::designs::{calibrate_threshold, sample_bcrd, sample_rerandomization};

    #[test]
    fn round_trip_is_exact() {
        let x = normal_quantile_covariate(12).unwrap();
        let a = calibrate_threshold(x.values(), 5000, 0.1, 3).unwrap().a;
        for d in [
            sample_bcrd(12, 20, 1).unwrap(),
            sample_rerandomization(x.values(), a, 20, 2).unwrap(),
        ] {
            let text = d.to_csv_string();
            let back = DesignSet::read_csv(text.as_bytes()).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.threshold().map(f64::to_bits), d.threshold().map(f64::to_bits));
            assert_eq!(back.to_csv_string(), text);
        }
    }

    #[test]
    fn layout() {
        let d = sample_bcrd(4, 1, 9).unwrap();
        let text = d.to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DESIGN_HEADER);
        assert!(lines[1].starts_with("bcrd,9,,0,"));
        assert!(lines[2].starts_with("bcrd,9,,1,"));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(DesignSet::read_csv("wrong,header\n".as_bytes()).is_err());
        assert!(DesignSet::read_csv(format!("{DESIGN_HEADER}\n").as_bytes()).is_err());
        let bad_pair = format!("{DESIGN_HEADER}\nbcrd,1,,0,++--\nbcrd,1,,1,++--\n");
        assert!(DesignSet::read_csv(bad_pair.as_bytes()).is_err());
        let bad_row = format!("{DESIGN_HEADER}\nbcrd,1,,0,++--\nbcrd,1,,2,--++\n");
        assert!(DesignSet::read_csv(bad_row.as_bytes()).is_err());
    }
}
