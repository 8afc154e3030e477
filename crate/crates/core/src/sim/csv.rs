use super::{TcspcHistogram, TimeGrid};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const HEADER: &str = "time_ps,counts";

impl TcspcHistogram {
    /// `time_ps,counts` with the start of each bin in whole picoseconds
    /// measured from the excitation pulse.
    pub fn to_csv(&self) -> Result<String> {
        let g = &self.grid;
        let integral = |x: f64| (x - x.round()).abs() < 1e-9;
        if !integral(g.bin_width_ps) || !integral(g.origin_ps) {
            return Err(Error::Usage(format!(
                "histogram CSV needs whole-picosecond bins and origin, got {} ps / {} ps",
                g.bin_width_ps, g.origin_ps
            )));
        }
        let mut s = String::with_capacity(16 * self.counts.len());
        s.push_str(HEADER);
        s.push('\n');
        for (i, c) in self.counts.iter().enumerate() {
            let t = (g.bin_start_ps(i) - g.origin_ps).round() as i64;
            let _ = writeln!(s, "{t},{c}");
        }
        Ok(s)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    /// Parses the form written by [`TcspcHistogram::to_csv`]; the time column
    /// must advance in equal steps.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(Error::Format(format!("histogram header must be `{HEADER}`")));
        }
        let mut times = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || {
                Error::Format(format!(
                    "histogram line {}: expected `<int>,<count>`, got `{line}`",
                    n + 2
                ))
            };
            let (t, c) = line.split_once(',').ok_or_else(bad)?;
            times.push(t.trim().parse::<i64>().map_err(|_| bad())?);
            counts.push(c.trim().parse::<u32>().map_err(|_| bad())?);
        }
        if times.len() < 2 {
            return Err(Error::Format("histogram needs at least 2 bins".into()));
        }
        let width = times[1] - times[0];
        if width <= 0 || times.windows(2).any(|w| w[1] - w[0] != width) {
            return Err(Error::Format("histogram time column is not evenly spaced".into()));
        }
        let grid =
            TimeGrid::new(width as f64, times.len(), -times[0] as f64).map_err(|e| Error::Format(e.to_string()))?;
        TcspcHistogram::new(grid, counts)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_grid() {
        let h = TcspcHistogram::new(TimeGrid::new(32.0, 5, 64.0).unwrap(), vec![0, 3, 9, 4, 1]).unwrap();
        let text = h.to_csv().unwrap();
        assert!(text.starts_with("time_ps,counts\n-64,0\n-32,3\n0,9\n"));
        assert!(!text.contains('\r'));
        assert_eq!(TcspcHistogram::from_csv(&text).unwrap(), h);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(TcspcHistogram::from_csv("t,c\n0,1\n"), Err(Error::Format(_))));
        assert!(matches!(
            TcspcHistogram::from_csv("time_ps,counts\n0,1\n32,2\n96,1\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            TcspcHistogram::from_csv("time_ps,counts\n0,1\n32,-2\n"),
            Err(Error::Format(_))
        ));
        let h = TcspcHistogram::new(TimeGrid::new(32.5, 2, 0.0).unwrap(), vec![1, 1]).unwrap();
        assert!(matches!(h.to_csv(), Err(Error::Usage(_))));
    }
}
