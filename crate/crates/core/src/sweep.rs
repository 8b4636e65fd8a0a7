//! Parameter-plane engine: classify a rectangular `(tau1, tau2)` grid by
//! Lyapunov spectrum, emit CSV and a raster image, resume from partial runs.
//!
//! The CSV is the source of truth; the PPM image is derived from it.
//! Per-cell failures (blowup, unconverged averages near the heteroclinic
//! limit) are data, recorded as gray cells, and never abort a sweep.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::SweepError;
use crate::integrate::{fmt_f64, IntegratorConfig};
use crate::lyapunov::{classify, spectrum, LyapunovSettings};
use crate::model::ModelParams;

/// Grid geometry, fixed coefficients and per-cell spectrum policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub tau1_lo: f64,
    pub tau1_hi: f64,
    pub n1: usize,
    pub tau2_lo: f64,
    pub tau2_hi: f64,
    pub n2: usize,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub kappa: f64,
    pub x0: [f64; 4],
    pub integrator: IntegratorConfig,
    pub lyapunov: LyapunovSettings,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            tau1_lo: 0.0,
            tau1_hi: 0.6,
            n1: 40,
            tau2_lo: 0.0,
            tau2_hi: 0.6,
            n2: 40,
            alpha: 1.0,
            beta: -0.1,
            omega: 1.0,
            kappa: 0.0,
            x0: [0.1, 0.1, 0.0, -0.99],
            integrator: IntegratorConfig::default(),
            lyapunov: LyapunovSettings::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(SweepError::InvalidSpec(format!(
                "grid must be at least 2x2, got {}x{}",
                self.n1, self.n2
            )));
        }
        for (name, lo, hi) in [
            ("tau1", self.tau1_lo, self.tau1_hi),
            ("tau2", self.tau2_lo, self.tau2_hi),
        ] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(SweepError::InvalidSpec(format!(
                    "{name} range [{lo}, {hi}] must be increasing within [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn tau1_at(&self, i: usize) -> f64 {
        self.tau1_lo + (self.tau1_hi - self.tau1_lo) * i as f64 / (self.n1 - 1) as f64
    }

    pub fn tau2_at(&self, j: usize) -> f64 {
        self.tau2_lo + (self.tau2_hi - self.tau2_lo) * j as f64 / (self.n2 - 1) as f64
    }
}

/// Rendering class of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Red,
    Blue,
    Yellow,
    /// Failed or unconverged cell.
    Gray,
}

impl CellClass {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            CellClass::Red => [255, 0, 0],
            CellClass::Blue => [0, 0, 255],
            CellClass::Yellow => [255, 255, 0],
            CellClass::Gray => [128, 128, 128],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellClass::Red => "red",
            CellClass::Blue => "blue",
            CellClass::Yellow => "yellow",
            CellClass::Gray => "gray",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "red" => Some(CellClass::Red),
            "blue" => Some(CellClass::Blue),
            "yellow" => Some(CellClass::Yellow),
            "gray" => Some(CellClass::Gray),
            _ => None,
        }
    }
}

/// One computed grid cell. Cells that blew up carry NaN exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub lambda: [f64; 3],
    pub radial: f64,
    pub nonneg: usize,
    pub class: CellClass,
}

/// Grid of results; a cell is done once its slot is filled.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub spec: SweepSpec,
    cells: Vec<Option<Cell>>,
}

impl SweepGrid {
    pub fn empty(spec: SweepSpec) -> Result<Self, SweepError> {
        spec.validate()?;
        Ok(Self { cells: vec![None; spec.n1 * spec.n2], spec })
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<&Cell> {
        self.cells[j * self.spec.n1 + i].as_ref()
    }

    pub fn set_cell(&mut self, cell: Cell) {
        let idx = cell.j * self.spec.n1 + cell.i;
        self.cells[idx] = Some(cell);
    }

    pub fn done_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.done_count() == self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter_map(|c| c.as_ref())
    }
}

fn compute_cell(spec: &SweepSpec, i: usize, j: usize) -> Cell {
    let tau1 = spec.tau1_at(i);
    let tau2 = spec.tau2_at(j);
    let gray = |lambda: [f64; 3], radial: f64, nonneg: usize| Cell {
        i,
        j,
        tau1,
        tau2,
        lambda,
        radial,
        nonneg,
        class: CellClass::Gray,
    };

    let params = match ModelParams::new(spec.alpha, spec.beta, spec.omega, tau1, tau2, spec.kappa)
    {
        Ok(p) => p,
        Err(_) => return gray([f64::NAN; 3], f64::NAN, 0),
    };
    match spectrum(&params, spec.x0, &spec.integrator, &spec.lyapunov) {
        Ok(s) => {
            // Unconverged cells keep their numbers but render gray.
            let class = classify(&s, spec.lyapunov.zero_tol, true).expect("override set");
            let cell_class = if s.converged {
                match class.nonneg_count {
                    0 => CellClass::Red,
                    1 => CellClass::Blue,
                    _ => CellClass::Yellow,
                }
            } else {
                CellClass::Gray
            };
            Cell {
                i,
                j,
                tau1,
                tau2,
                lambda: s.exponents,
                radial: s.radial_exponent,
                nonneg: class.nonneg_count,
                class: cell_class,
            }
        }
        Err(_) => gray([f64::NAN; 3], f64::NAN, 0),
    }
}

/// Computes every cell not already present in `resume_from`. Results are a
/// pure function of the spec: worker count and scheduling never change the
/// produced grid. Progress lines `done i j class` go to standard error.
pub fn run_sweep(
    spec: &SweepSpec,
    workers: usize,
    resume_from: Option<&SweepGrid>,
) -> Result<SweepGrid, SweepError> {
    spec.validate()?;
    let mut grid = SweepGrid::empty(*spec)?;
    if let Some(prev) = resume_from {
        for c in prev.cells() {
            if c.i < spec.n1 && c.j < spec.n2 {
                grid.set_cell(*c);
            }
        }
    }

    let pending: Vec<(usize, usize)> = (0..spec.n2)
        .flat_map(|j| (0..spec.n1).map(move |i| (i, j)))
        .filter(|&(i, j)| grid.cell(i, j).is_none())
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SweepError::InvalidSpec(format!("worker pool: {e}")))?;
    let computed: Vec<Cell> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(i, j)| {
                let c = compute_cell(spec, i, j);
                eprintln!("done {} {} {}", c.i, c.j, c.class.name());
                c
            })
            .collect()
    });
    for c in computed {
        grid.set_cell(c);
    }
    Ok(grid)
}

const CSV_HEADER: &str = "i,j,tau1,tau2,lambda1,lambda2,lambda3,radial,nonneg,class";

/// Writes done cells, sorted by `(tau2, tau1)`, in the shared float format.
pub fn grid_to_csv(grid: &SweepGrid, w: &mut impl Write) -> Result<(), SweepError> {
    writeln!(w, "{CSV_HEADER}")?;
    let mut cells: Vec<&Cell> = grid.cells().collect();
    cells.sort_by_key(|c| (c.j, c.i));
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            c.i,
            c.j,
            fmt_f64(c.tau1),
            fmt_f64(c.tau2),
            fmt_f64(c.lambda[0]),
            fmt_f64(c.lambda[1]),
            fmt_f64(c.lambda[2]),
            fmt_f64(c.radial),
            c.nonneg,
            c.class.name()
        )?;
    }
    Ok(())
}

/// Reads a (possibly partial) sweep CSV back into a grid with correct
/// done-flags.
pub fn csv_to_grid(spec: &SweepSpec, r: &mut impl BufRead) -> Result<SweepGrid, SweepError> {
    let mut grid = SweepGrid::empty(*spec)?;
    let mut lines = r.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(SweepError::Parse { line: 1, message: "empty file".into() }),
    };
    let got: Vec<&str> = header.trim_end().split(',').collect();
    let want: Vec<&str> = CSV_HEADER.split(',').collect();
    for col in &want {
        if !got.contains(col) {
            return Err(SweepError::Parse {
                line: 1,
                message: format!("missing column `{col}`"),
            });
        }
    }
    let idx = |name: &str| got.iter().position(|c| *c == name).unwrap();
    let (ci, cj) = (idx("i"), idx("j"));
    let (ct1, ct2) = (idx("tau1"), idx("tau2"));
    let (cl1, cl2, cl3) = (idx("lambda1"), idx("lambda2"), idx("lambda3"));
    let (cr, cn, cc) = (idx("radial"), idx("nonneg"), idx("class"));

    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != got.len() {
            return Err(SweepError::Parse {
                line: lineno,
                message: format!("expected {} fields, got {}", got.len(), fields.len()),
            });
        }
        let perr = |message: String| SweepError::Parse { line: lineno, message };
        let int = |s: &str, name: &str| {
            s.parse::<usize>().map_err(|e| perr(format!("column `{name}`: {e}")))
        };
        let num = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|e| perr(format!("column `{name}`: {e}")))
        };
        let i = int(fields[ci], "i")?;
        let j = int(fields[cj], "j")?;
        if i >= spec.n1 || j >= spec.n2 {
            return Err(perr(format!("cell ({i}, {j}) outside the {}x{} grid", spec.n1, spec.n2)));
        }
        let class = CellClass::parse(fields[cc])
            .ok_or_else(|| perr(format!("column `class`: unknown class `{}`", fields[cc])))?;
        grid.set_cell(Cell {
            i,
            j,
            tau1: num(fields[ct1], "tau1")?,
            tau2: num(fields[ct2], "tau2")?,
            lambda: [
                num(fields[cl1], "lambda1")?,
                num(fields[cl2], "lambda2")?,
                num(fields[cl3], "lambda3")?,
            ],
            radial: num(fields[cr], "radial")?,
            nonneg: int(fields[cn], "nonneg")?,
            class,
        });
    }
    Ok(grid)
}

/// Binary PPM (P6), width `n1`, height `n2`, top row at max tau2. Cells
/// not yet computed render gray.
pub fn render_grid(grid: &SweepGrid, w: &mut impl Write) -> Result<(), SweepError> {
    let (n1, n2) = (grid.spec.n1, grid.spec.n2);
    write!(w, "P6\n{n1} {n2}\n255\n")?;
    for row in 0..n2 {
        let j = n2 - 1 - row;
        for i in 0..n1 {
            let rgb = grid
                .cell(i, j)
                .map(|c| c.class.rgb())
                .unwrap_or(CellClass::Gray.rgb());
            w.write_all(&rgb)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn tiny_spec() -> SweepSpec {
        // Cheap settings for unit tests; acceptance runs use defaults.
        let mut spec = SweepSpec {
            n1: 2,
            n2: 2,
            tau1_hi: 0.5,
            tau2_hi: 0.5,
            ..Default::default()
        };
        spec.integrator.t_transient = 50.0;
        spec.lyapunov.t_total = 150.0;
        spec
    }

    #[test]
    fn grid_geometry() {
        let spec = SweepSpec::default();
        assert_eq!(spec.tau1_at(0), 0.0);
        assert!((spec.tau1_at(39) - 0.6).abs() < 1e-15);
        assert!(spec.validate().is_ok());
        let bad = SweepSpec { n1: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SweepSpec { tau2_hi: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_round_trip_and_resume_flags() {
        let spec = tiny_spec();
        let mut grid = SweepGrid::empty(spec).unwrap();
        grid.set_cell(Cell {
            i: 1,
            j: 0,
            tau1: spec.tau1_at(1),
            tau2: spec.tau2_at(0),
            lambda: [0.001, -0.002, -0.4],
            radial: -2.0,
            nonneg: 2,
            class: CellClass::Yellow,
        });
        let mut buf = Vec::new();
        grid_to_csv(&grid, &mut buf).unwrap();
        let parsed = csv_to_grid(&spec, &mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(parsed.done_count(), 1);
        assert_eq!(parsed.cell(1, 0).unwrap(), grid.cell(1, 0).unwrap());
        assert!(parsed.cell(0, 0).is_none());
        let mut buf2 = Vec::new();
        grid_to_csv(&parsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn csv_missing_column_named() {
        let spec = tiny_spec();
        let text = "i,j,tau1,tau2,lambda1,lambda2,lambda3,radial,class\n";
        let err = csv_to_grid(&spec, &mut BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            SweepError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("nonneg"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn csv_bad_row_has_line_number() {
        let spec = tiny_spec();
        let text = format!("{CSV_HEADER}\n0,0,zero,0,0,0,0,0,0,red\n");
        let err = csv_to_grid(&spec, &mut BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            SweepError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("tau1"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ppm_layout() {
        let spec = tiny_spec();
        let mut grid = SweepGrid::empty(spec).unwrap();
        let mk = |i, j, class| Cell {
            i,
            j,
            tau1: spec.tau1_at(i),
            tau2: spec.tau2_at(j),
            lambda: [0.0; 3],
            radial: -2.0,
            nonneg: 0,
            class,
        };
        // Bottom row (j = 0): red, blue. Top row (j = 1): yellow, gray.
        grid.set_cell(mk(0, 0, CellClass::Red));
        grid.set_cell(mk(1, 0, CellClass::Blue));
        grid.set_cell(mk(0, 1, CellClass::Yellow));
        grid.set_cell(mk(1, 1, CellClass::Gray));
        let mut buf = Vec::new();
        render_grid(&grid, &mut buf).unwrap();
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        let px = &buf[header.len()..];
        // Row 0 of the image is the max-tau2 row.
        assert_eq!(
            px,
            [255, 255, 0, 128, 128, 128, 255, 0, 0, 0, 0, 255]
        );
    }

    #[test]
    fn small_sweep_resume_idempotent() {
        let spec = tiny_spec();
        let full = run_sweep(&spec, 1, None).unwrap();
        assert!(full.is_complete());

        // Rerun with a partial grid preloaded: identical output.
        let mut partial = SweepGrid::empty(spec).unwrap();
        partial.set_cell(*full.cell(0, 0).unwrap());
        partial.set_cell(*full.cell(1, 1).unwrap());
        let resumed = run_sweep(&spec, 2, Some(&partial)).unwrap();
        assert!(resumed.done_count() >= partial.done_count());
        let (mut a, mut b) = (Vec::new(), Vec::new());
        grid_to_csv(&full, &mut a).unwrap();
        grid_to_csv(&resumed, &mut b).unwrap();
        assert_eq!(a, b);
    }
}
