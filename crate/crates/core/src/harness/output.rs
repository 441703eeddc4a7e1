//! CSV and gnuplot output. Numbers are printed with fixed precision so equal
//! runs produce equal bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    /// End of the sample window.
    pub time_s: f64,
    pub tcp_goodput_mbps: f64,
    pub nc_goodput_mbps: f64,
    /// Downlink busy fraction within the window.
    pub utilization: f64,
    /// Downlink packets dropped within the window, percent of offered.
    pub loss_pct: f64,
    /// Downlink queue occupancy at the end of the window.
    pub queue_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub loss_pct: f64,
    pub tcp_goodput_mbps: f64,
    pub nc_goodput_mbps: f64,
}

/// A row type with a fixed CSV schema and a matching plot script.
pub trait PlotRows {
    const HEADER: &'static str;
    fn csv_line(&self) -> String;
    fn plot_script(csv_file: &str) -> String;
}

impl PlotRows for SampleRow {
    const HEADER: &'static str = "time_s,tcp_goodput_mbps,nc_goodput_mbps,utilization,loss_pct,queue_bytes";

    fn csv_line(&self) -> String {
        format!(
            "{:.3},{:.6},{:.6},{:.6},{:.4},{}",
            self.time_s,
            self.tcp_goodput_mbps,
            self.nc_goodput_mbps,
            self.utilization,
            self.loss_pct,
            self.queue_bytes
        )
    }

    fn plot_script(csv: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set terminal pngcairo size 1000,600\n\
             set output '{stem}.png'\n\
             set xlabel 'time (s)'\n\
             set ylabel 'goodput (Mbps)'\n\
             set y2label 'downlink utilization'\n\
             set y2range [0:1]\n\
             set ytics nomirror\n\
             set y2tics\n\
             plot '{csv}' using 1:2 with lines title 'TCP', \\\n     \
             '{csv}' using 1:3 with lines title 'TCP/NC', \\\n     \
             '{csv}' using 1:4 axes x1y2 with lines dt 2 title 'utilization'\n",
            stem = csv.trim_end_matches(".csv"),
        )
    }
}

impl PlotRows for ScatterRow {
    const HEADER: &'static str = "loss_pct,tcp_goodput_mbps,nc_goodput_mbps";

    fn csv_line(&self) -> String {
        format!(
            "{:.4},{:.6},{:.6}",
            self.loss_pct, self.tcp_goodput_mbps, self.nc_goodput_mbps
        )
    }

    fn plot_script(csv: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set terminal pngcairo size 800,600\n\
             set output '{stem}.png'\n\
             set xlabel 'packet loss (%)'\n\
             set ylabel 'goodput (Mbps)'\n\
             plot '{csv}' using 1:2 with points pt 7 title 'TCP', \\\n     \
             '{csv}' using 1:3 with points pt 5 title 'TCP/NC'\n",
            stem = csv.trim_end_matches(".csv"),
        )
    }
}

pub fn to_csv<R: PlotRows>(rows: &[R]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(R::HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Writes `csv_path` and a gnuplot script beside it with a `.gp` extension.
/// Returns both paths.
pub fn emit_plot_data<R: PlotRows>(rows: &[R], csv_path: &Path) -> Result<(PathBuf, PathBuf), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Runtime("no rows to write".into()));
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    std::fs::write(csv_path, to_csv(rows)).map_err(io(csv_path))?;
    let script = csv_path.with_extension("gp");
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    std::fs::write(&script, R::plot_script(&name)).map_err(io(&script))?;
    Ok((csv_path.to_path_buf(), script))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_lines() {
        let r = SampleRow {
            time_s: 1.0,
            tcp_goodput_mbps: 0.25,
            nc_goodput_mbps: 2.0,
            utilization: 0.5,
            loss_pct: 1.0,
            queue_bytes: 1500,
        };
        assert_eq!(
            to_csv(&[r]),
            "time_s,tcp_goodput_mbps,nc_goodput_mbps,utilization,loss_pct,queue_bytes\n\
             1.000,0.250000,2.000000,0.500000,1.0000,1500\n"
        );
        let s = ScatterRow {
            loss_pct: 2.0,
            tcp_goodput_mbps: 0.3,
            nc_goodput_mbps: 2.2,
        };
        assert_eq!(
            to_csv(&[s]),
            "loss_pct,tcp_goodput_mbps,nc_goodput_mbps\n2.0000,0.300000,2.200000\n"
        );
    }

    #[test]
    fn writes_files_and_rejects_empty_or_unwritable() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![ScatterRow {
            loss_pct: 0.0,
            tcp_goodput_mbps: 1.0,
            nc_goodput_mbps: 1.0,
        }];
        let (csv, gp) = emit_plot_data(&rows, &dir.path().join("sweep.csv")).unwrap();
        assert!(std::fs::read_to_string(csv).unwrap().starts_with(ScatterRow::HEADER));
        let script = std::fs::read_to_string(gp).unwrap();
        assert!(script.contains("'sweep.csv' using 1:2"));
        assert!(script.contains("'sweep.csv' using 1:3"));

        let empty: Vec<ScatterRow> = Vec::new();
        assert!(emit_plot_data(&empty, &dir.path().join("x.csv")).is_err());
        let missing = dir.path().join("no/such/dir/x.csv");
        assert!(matches!(
            emit_plot_data(&rows, &missing),
            Err(HarnessError::Io { .. })
        ));
    }
}
