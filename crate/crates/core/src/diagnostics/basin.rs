use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;

use crate::problem::Problem;
use crate::solvers::{self, SolverConfig, Termination};
use crate::{Error, Result};

/// Distance within which a final point is assigned to a root.
pub const ROOT_MATCH_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) && x_min < x_max && y_min < y_max;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "bad rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Rect { x_min, x_max, y_min, y_max })
    }

    /// Center of cell `(ix, iy)` on an `nx × ny` grid.
    pub fn cell_center(&self, ix: usize, iy: usize, nx: usize, ny: usize) -> (f64, f64) {
        let x = self.x_min + (ix as f64 + 0.5) * (self.x_max - self.x_min) / nx as f64;
        let y = self.y_min + (iy as f64 + 0.5) * (self.y_max - self.y_min) / ny as f64;
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinGrid {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub num_roots: usize,
    /// Row-major by `iy`, `-1` where no root was reached.
    pub root_index: Vec<i32>,
    /// Steps taken from each cell.
    pub iters: Vec<usize>,
    /// Whether the run from each cell ended with `RootFound`.
    pub converged: Vec<bool>,
}

impl BasinGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> (i32, usize) {
        let i = iy * self.nx + ix;
        (self.root_index[i], self.iters[i])
    }

    /// Cells that reached each root.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_roots];
        for &r in &self.root_index {
            if r >= 0 {
                counts[r as usize] += 1;
            }
        }
        counts
    }

    /// Plain PGM, top row at `y_max`. Root `i` gets gray level
    /// `255·(i+1)/num_roots`, unconverged cells are black.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.nx, self.ny);
        for iy in (0..self.ny).rev() {
            let row: Vec<String> = (0..self.nx)
                .map(|ix| {
                    let r = self.cell(ix, iy).0;
                    if r < 0 {
                        "0".to_string()
                    } else {
                        (255 * (r as usize + 1) / self.num_roots).to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ix,iy,root_index,iters\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (r, it) = self.cell(ix, iy);
                writeln!(out, "{ix},{iy},{r},{it}").unwrap();
            }
        }
        out
    }
}

/// Solves from every cell center and records which of `roots` was reached.
pub fn basin_grid(
    problem: &Problem,
    rect: Rect,
    nx: usize,
    ny: usize,
    config: &SolverConfig,
    roots: &[DVector<f64>],
) -> Result<BasinGrid> {
    if problem.domain_dim() != 2 || problem.codomain_dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "basin grids need a 2 x 2 system, `{}` is {} x {}",
            problem.name(),
            problem.codomain_dim(),
            problem.domain_dim()
        )));
    }
    if roots.is_empty() {
        return Err(Error::InvalidInput("no roots to assign cells to".into()));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let resolved = config.resolve(problem)?;
    let mut root_index = Vec::with_capacity(nx * ny);
    let mut iters = Vec::with_capacity(nx * ny);
    let mut converged = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = rect.cell_center(ix, iy, nx, ny);
            let x0 = DVector::from_column_slice(&[x, y]);
            match solvers::solve_resolved(problem, &resolved, &x0) {
                Ok(run) => {
                    let xf = run.final_point();
                    let hit = roots.iter().position(|r| (&xf - r).norm() <= ROOT_MATCH_RADIUS);
                    root_index.push(hit.map_or(-1, |i| i as i32));
                    iters.push(run.steps());
                    converged.push(run.termination == Termination::RootFound);
                }
                Err(_) => {
                    root_index.push(-1);
                    iters.push(0);
                    converged.push(false);
                }
            }
        }
    }
    Ok(BasinGrid {
        rect,
        nx,
        ny,
        num_roots: roots.len(),
        root_index,
        iters,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::corpus::{cubic2d, quad1d};

    #[test]
    fn single_cell_on_root() {
        let p = cubic2d();
        let rect = Rect::new(0.5, 1.5, -0.5, 0.5).unwrap();
        let g = basin_grid(&p, rect, 1, 1, &SolverConfig::default(), p.known_roots()).unwrap();
        assert_eq!(g.root_index, vec![0]);
        assert!(g.iters[0] <= 1);
    }

    #[test]
    fn far_rectangle_diverges() {
        let p = cubic2d();
        let rect = Rect::new(1e9, 2e9, 1e9, 2e9).unwrap();
        let g = basin_grid(&p, rect, 3, 3, &SolverConfig::default(), p.known_roots()).unwrap();
        assert_eq!(g.root_index, vec![-1; 9]);
    }

    #[test]
    fn small_grid_sees_all_three_roots() {
        let p = cubic2d();
        let rect = Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let g = basin_grid(&p, rect, 15, 15, &SolverConfig::default(), p.known_roots()).unwrap();
        assert!(g.counts().iter().all(|&c| c > 0), "{:?}", g.counts());
        let again = basin_grid(&p, rect, 15, 15, &SolverConfig::default(), p.known_roots()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn output_formats() {
        let g = BasinGrid {
            rect: Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            nx: 2,
            ny: 2,
            num_roots: 3,
            root_index: vec![0, 1, 2, -1],
            iters: vec![3, 4, 5, 6],
            converged: vec![true, true, true, false],
        };
        assert_eq!(g.to_pgm(), "P2\n2 2\n255\n255 0\n85 170\n");
        assert_eq!(g.to_csv(), "ix,iy,root_index,iters\n0,0,0,3\n1,0,1,4\n0,1,2,5\n1,1,-1,6\n");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
        let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(basin_grid(&quad1d(), rect, 2, 2, &SolverConfig::default(), quad1d().known_roots()).is_err());
        assert!(basin_grid(&cubic2d(), rect, 2, 2, &SolverConfig::default(), &[]).is_err());
    }
}
