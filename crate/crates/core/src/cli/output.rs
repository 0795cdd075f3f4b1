use crate::filter::ConditionalStats;
use crate::propagation::TimeGrid;
use crate::simulation::Scenario;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or large magnitudes.
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn header(out: &mut String, leading: &[&str], orders: usize) {
    out.push_str(&leading.join(","));
    for p in 1..=orders {
        let _ = write!(out, ",m_{p}");
    }
    out.push('\n');
}

/// `t, X_true, mean, variance, m_1..m_P`, one row per grid time.
pub fn method_csv(stats: &[ConditionalStats], path: &[f64], orders: usize) -> String {
    let mut out = String::new();
    header(&mut out, &["t", "X_true", "mean", "variance"], orders);
    for (s, x) in stats.iter().zip(path) {
        let _ = write!(
            out,
            "{},{},{},{}",
            Num(s.time),
            Num(*x),
            Num(s.mean),
            Num(s.variance)
        );
        for &m in s.raw_moments.iter().take(orders) {
            let _ = write!(out, ",{}", Num(m));
        }
        out.push('\n');
    }
    out
}

/// `t, m_1..m_P` of the approximate law.
pub fn moments_csv(stats: &[ConditionalStats], orders: usize) -> String {
    let mut out = String::new();
    header(&mut out, &["t"], orders);
    for s in stats {
        let _ = write!(out, "{}", Num(s.time));
        for &m in s.raw_moments.iter().take(orders) {
            let _ = write!(out, ",{}", Num(m));
        }
        out.push('\n');
    }
    out
}

/// `step, t, X, y_1..y_d`; the `y` fields are empty off observation steps.
pub fn scenario_csv(scenario: &Scenario, dim: usize) -> String {
    let grid = &scenario.grid;
    let mut out = format!(
        "# model={} seed={}\nstep,t,X",
        scenario.model, scenario.seed
    );
    for i in 1..=dim {
        let _ = write!(out, ",y_{i}");
    }
    out.push('\n');
    for (l, x) in scenario.path.iter().enumerate() {
        let _ = write!(out, "{l},{},{}", Num(grid.time(l)), Num(*x));
        match grid.observation_at(l) {
            Some(k) => {
                for &y in &scenario.observations[k - 1] {
                    let _ = write!(out, ",{}", Num(y));
                }
            }
            None => out.push_str(&",".repeat(dim)),
        }
        out.push('\n');
    }
    out
}

/// Reads a file written by [`scenario_csv`] back onto `grid`.
pub fn parse_scenario(
    text: &str,
    grid: &TimeGrid,
    dim: usize,
    model: &str,
) -> Result<Scenario, String> {
    let mut seed = 0;
    let mut path = Vec::with_capacity(grid.steps() + 1);
    let mut observations = Vec::with_capacity(grid.obs_count());
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                if let Some(s) = kv.strip_prefix("seed=") {
                    seed = s
                        .parse()
                        .map_err(|_| format!("line {line_no}: bad seed '{s}'"))?;
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            let cols = line.split(',').count();
            if cols != 3 + dim {
                return Err(format!(
                    "line {line_no}: expected {} columns, found {cols}",
                    3 + dim
                ));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 + dim {
            return Err(format!(
                "line {line_no}: expected {} fields, found {}",
                3 + dim,
                fields.len()
            ));
        }
        let l = path.len();
        let x: f64 = fields[2]
            .parse()
            .map_err(|_| format!("line {line_no}: bad state value '{}'", fields[2]))?;
        path.push(x);
        if grid.observation_at(l).is_some() {
            let y = fields[3..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| format!("line {line_no}: bad observation '{f}'"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            observations.push(y);
        }
    }
    if path.len() != grid.steps() + 1 {
        return Err(format!(
            "scenario has {} rows, grid needs {}",
            path.len(),
            grid.steps() + 1
        ));
    }
    Ok(Scenario {
        model: model.to_string(),
        seed,
        grid: *grid,
        path,
        observations,
    })
}

/// Parses whitespace- or comma-separated numbers; `#` starts a comment.
pub fn parse_moments(text: &str) -> Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok
                .parse()
                .map_err(|_| format!("line {}: cannot parse '{tok}' as a number", i + 1))?;
            values.push(v);
        }
    }
    Ok(values)
}
