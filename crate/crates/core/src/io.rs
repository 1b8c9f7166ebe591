//! Profile CSV output and binary checkpoints.
//!
//! Checkpoint layout, all little-endian:
//!
//! ```text
//! b"EPSH" | version u32 | dim u32 | n1 u32 | n2 u32 | step u64 | t f64
//! | (dim + 2) field arrays | σ array       (each (n1+1)·n2 f64)
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::background::BackgroundProfile;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::halfline::StationaryProfile1D;
use crate::state::FieldState;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EPSH";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_profile_csv(profile: &StationaryProfile1D, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x1,rho,u,theta,phi,dphi")?;
    for i in 0..profile.x.len() {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            profile.x[i], profile.rho[i], profile.u[i], profile.theta[i], profile.phi[i], profile.dphi[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Full fields (background plus perturbation) at every node, one row per node.
pub fn write_fields_csv(state: &FieldState, background: &BackgroundProfile, grid: &Grid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dim = grid.dim();
    let header = if dim == 2 {
        "y1,x2,x1,psi,eta1,eta2,zeta,sigma,rho,u1,u2,theta,phi"
    } else {
        "x1,psi,eta1,zeta,sigma,rho,u1,theta,phi"
    };
    writeln!(w, "{header}")?;
    let nc = state.ncomp();
    for j in 0..grid.n2() {
        for i in 0..grid.ny1() {
            let p = grid.idx(i, j);
            let b = background.at(i);
            let mut row: Vec<f64> = Vec::with_capacity(13);
            if dim == 2 {
                row.extend([grid.y1(i), grid.x2(j), grid.x1(i, j)]);
            } else {
                row.push(grid.y1(i));
            }
            row.extend((0..nc).map(|c| state.fields[c][p]));
            row.push(state.sigma[p]);
            row.push((b.v + state.fields[0][p]).exp());
            row.push(b.u + state.fields[1][p]);
            if dim == 2 {
                row.push(state.fields[2][p]);
            }
            row.push(b.theta + state.fields[nc - 1][p]);
            row.push(b.phi + state.sigma[p]);
            let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint(state: &FieldState, step: u64, grid: &Grid, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        for x in [CHECKPOINT_VERSION, grid.dim() as u32, grid.n1() as u32, grid.n2() as u32] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&step.to_le_bytes())?;
        w.write_all(&state.t.to_le_bytes())?;
        for arr in state.fields.iter().chain(std::iter::once(&state.sigma)) {
            for x in arr {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(b)
}

/// Reads a checkpoint written for `grid`; returns the state and step count.
pub fn read_checkpoint(grid: &Grid, path: &Path) -> Result<(FieldState, u64)> {
    let mut r = std::io::BufReader::new(File::open(path)?);
    if &take::<4>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dims: Vec<u32> = (0..3)
        .map(|_| take(&mut r).map(u32::from_le_bytes))
        .collect::<Result<_>>()?;
    let want = [grid.dim() as u32, grid.n1() as u32, grid.n2() as u32];
    if dims != want {
        return Err(Error::Checkpoint(format!(
            "grid mismatch: file has (dim, n1, n2) = {dims:?}, run has {want:?}"
        )));
    }
    let step = u64::from_le_bytes(take(&mut r)?);
    let mut state = FieldState::zeros(grid);
    state.t = f64::from_le_bytes(take(&mut r)?);
    for arr in state.fields.iter_mut().chain(std::iter::once(&mut state.sigma)) {
        for x in arr.iter_mut() {
            *x = f64::from_le_bytes(take(&mut r)?);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((state, step))
}
