//! CSV and plot-script writers. Numbers use the shortest representation
//! that parses back to the same `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrate::{ControlTrajectory, CostateTrajectory, StateTrajectory};
use crate::model::{Control, StateVec, STATE_LABELS};
use crate::octl::OctlResult;
use crate::scenarios::{susceptible_direction, ScenarioReport, Trend};
use crate::validate::HeatMatrix;

/// Files written so far, removed again unless the run completes.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputSet {
            dir,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        path
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.claim(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.claim(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn trajectory_table(
    state: &StateTrajectory,
    controls: Option<&ControlTrajectory>,
) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut header = vec!["t".to_string()];
    header.extend(STATE_LABELS.iter().map(|s| s.to_string()));
    if let Some(u) = controls {
        if !state.same_mesh(u) {
            return Err(Error::MeshMismatch);
        }
        header.extend(Control::ALL.iter().map(|c| c.name().to_string()));
    }
    let rows = state
        .values
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut row = vec![num(state.mesh.node(k))];
            row.extend(x.iter().copied().map(num));
            if let Some(u) = controls {
                row.extend(u.values[k].iter().copied().map(num));
            }
            row
        })
        .collect();
    Ok((header, rows))
}

pub fn costate_table(costate: &CostateTrajectory) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["t".to_string()];
    header.extend(STATE_LABELS.iter().map(|s| format!("lambda_{s}")));
    let rows = costate
        .values
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let mut row = vec![num(costate.mesh.node(k))];
            row.extend(l.iter().copied().map(num));
            row
        })
        .collect();
    (header, rows)
}

/// One row per iterate; `theta` is the step that produced it (empty for the start).
pub fn cost_history_table(result: &OctlResult) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["iteration", "J", "theta"].map(String::from).to_vec();
    let rows = result
        .cost_history
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let theta = k
                .checked_sub(1)
                .and_then(|i| result.thetas.get(i))
                .map(|t| num(*t))
                .unwrap_or_default();
            vec![k.to_string(), num(*j), theta]
        })
        .collect();
    (header, rows)
}

/// Corner cell names both axes; first row holds x coordinates, first column y.
pub fn heat_table(m: &HeatMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec![format!("{}\\{}", m.y_name, m.x_name)];
    header.extend(m.x_coords.iter().copied().map(num));
    let rows = m
        .y_coords
        .iter()
        .zip(&m.values)
        .map(|(y, row)| {
            let mut out = vec![num(*y)];
            out.extend(row.iter().copied().map(num));
            out
        })
        .collect();
    (header, rows)
}

pub fn gnuplot_script(m: &HeatMatrix, csv_name: &str, png_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,640\n\
         set output '{png_name}'\n\
         set title 'B at observation day'\n\
         set xlabel '{x}'\n\
         set ylabel '{y}'\n\
         set cblabel 'B'\n\
         set view map\n\
         set xrange [{x0}:{x1}]\n\
         set yrange [{y0}:{y1}]\n\
         plot \"< sed '1s/^[^,]*/0/' {csv_name}\" nonuniform matrix with image notitle\n",
        x = m.x_name,
        y = m.y_name,
        x0 = m.x_coords.first().copied().unwrap_or(0.0),
        x1 = m.x_coords.last().copied().unwrap_or(1.0),
        y0 = m.y_coords.first().copied().unwrap_or(0.0),
        y1 = m.y_coords.last().copied().unwrap_or(1.0),
    )
}

pub fn summary_table(reports: &[ScenarioReport]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut header = vec!["scenario".to_string()];
    header.extend(STATE_LABELS.iter().map(|s| s.to_string()));
    header.extend(["avg_I", "avg_B", "J", "converged", "iterations"].map(String::from));
    header.extend(
        STATE_LABELS[StateVec::IFN_GAMMA..]
            .iter()
            .map(|s| format!("trend_{s}")),
    );
    header.push("S_vs_untreated".to_string());

    let directions = susceptible_direction(reports)?;
    let rows = reports
        .iter()
        .zip(directions)
        .map(|(r, (_, dir))| {
            let mut row = vec![r.id.clone()];
            row.extend(r.final_state.0.iter().copied().map(num));
            row.extend([
                num(r.avg_i),
                num(r.avg_b),
                num(r.cost),
                r.converged.to_string(),
                r.iterations.to_string(),
            ]);
            row.extend(r.cytokine_trends.iter().map(|t| t.symbol().to_string()));
            row.push(Trend::symbol(dir).to_string());
            row
        })
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = std::env::temp_dir().join(format!("lepra-octl-out-{}", std::process::id()));
        let kept = {
            let mut out = OutputSet::create(&dir).unwrap();
            out.text("a.txt", "a").unwrap();
            out.commit()
        };
        assert!(kept[0].exists());
        let dropped = {
            let mut out = OutputSet::create(&dir).unwrap();
            out.text("b.txt", "b").unwrap()
        };
        assert!(!dropped.exists());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn heat_table_layout() {
        let m = HeatMatrix::from_constant(3, 2.5);
        let (h, rows) = heat_table(&m);
        assert_eq!(h, ["y\\x", "0", "0.5", "1"]);
        assert_eq!(rows[2], ["1", "2.5", "2.5", "2.5"]);
    }
}
