use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use approxbundle::bundle::{read_cocycle, read_frames, DiscreteCocycle};
use approxbundle::complex::{read_filtration, Filtration};
use approxbundle::ingest::{read_points_csv, read_rotations_csv, DissimilarityMatrix, PointCloud};
use approxbundle::matgeo::Frame;
use nalgebra::Matrix3;

use crate::error::{CliError, CliResult};

/// `-` reads standard input.
pub fn reader(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Box::new(BufReader::new(f)))
}

/// Writes through `body` to `path`, or to standard output when absent.
pub fn write_to<F>(path: Option<&Path>, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let shown = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let result = match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(f);
            body(&mut w).and_then(|_| w.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(|e| CliError::io(&shown, e))
}

pub fn points(path: &Path) -> CliResult<PointCloud> {
    Ok(read_points_csv(reader(path)?)?)
}

pub fn dissimilarity(path: &Path) -> CliResult<DissimilarityMatrix> {
    let m = read_points_csv(reader(path)?)?;
    Ok(DissimilarityMatrix::new(m.as_matrix().clone())?)
}

pub fn rotations(path: &Path) -> CliResult<Vec<Matrix3<f64>>> {
    Ok(read_rotations_csv(reader(path)?)?)
}

pub fn filtration(path: &Path) -> CliResult<Arc<Filtration>> {
    Ok(Arc::new(read_filtration(reader(path)?)?))
}

pub fn frames(path: &Path) -> CliResult<Vec<Frame>> {
    Ok(read_frames(reader(path)?)?)
}

/// Cocycle file over the complex of `f`.
pub fn cocycle(path: &Path, f: &Filtration) -> CliResult<DiscreteCocycle> {
    Ok(read_cocycle(reader(path)?)?.into_cocycle(f.complex().clone())?)
}
