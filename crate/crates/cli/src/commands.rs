use std::io::Write;
use std::sync::Arc;

use approxbundle::bundle::{
    consistency_radius, epsilon_death, triangle_defects, witness, write_cocycle, write_trivialization, DiscreteCocycle,
    DiscreteTrivialization,
};
use approxbundle::charclass::{euler, read_class_csv, reduce_mod, sw1, sw2, write_class_csv, ClassKind};
use approxbundle::complex::{vr_filtration, write_filtration, Filtration, Ring, SimplicialComplex};
use approxbundle::ingest::{
    aligned_image_dissimilarity, delay_embed, gen_double_gyre, gen_lines, gen_sphere_projections, local_pca,
    write_points_csv, write_rotations_csv, DissimilarityMatrix, DoubleGyre, LinesConfig, PointCloud,
};
use approxbundle::persistence::{decompose_class, persistent_cohomology, write_diagram_csv, ClassDecomposition, PersistenceDiagram};
use approxbundle::pipeline::persistence_filtration;
use nalgebra::Matrix3;

use crate::error::{CliError, CliResult};
use crate::{io, Cmd, GenCmd, MetricInput};

pub fn run(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Gen { dataset } => generate(dataset),
        Cmd::Vr(a) => {
            let m = load_metric(&a.input)?;
            let f = vr_filtration(m.dissimilarity.as_matrix(), a.max_dim, a.threshold)?;
            io::write_to(a.out.as_deref(), |w| write_filtration(&f, w))
        }
        Cmd::LocalPca(a) => {
            let x = io::points(&a.points)?;
            let pca = local_pca(&x, a.k, a.rank)?;
            if !pca.degenerate.is_empty() {
                log::warn!("{} points have a degenerate neighborhood", pca.degenerate.len());
            }
            let vertices = Arc::new(SimplicialComplex::new(x.len(), std::iter::empty())?);
            let phi = pca.trivialization(vertices)?;
            io::write_to(a.out.as_deref(), |w| write_trivialization(&phi, w))
        }
        Cmd::Witness(a) => {
            let f = io::filtration(&a.filtration)?;
            let phi = DiscreteTrivialization::new(f.complex().clone(), io::frames(&a.frames)?)?;
            let omega = witness(&phi)?;
            io::write_to(a.out.as_deref(), |w| write_cocycle(&omega, w))
        }
        Cmd::Defects(a) => {
            let f = io::filtration(&a.filtration)?;
            let omega = io::cocycle(&a.cocycle, &f)?;
            eprintln!("consistency radius {}", consistency_radius(&omega));
            io::write_to(a.out.as_deref(), |w| write_defects(&omega, &f, w))
        }
        Cmd::Death(a) => {
            let f = io::filtration(&a.filtration)?;
            let omega = io::cocycle(&a.cocycle, &f)?;
            println!("{}", epsilon_death(&omega, &f, a.eps)?);
            Ok(())
        }
        Cmd::Sw1(a) => class_command(&a, ClassKind::Sw1, None),
        Cmd::Sw2(a) => class_command(&a, ClassKind::Sw2, None),
        Cmd::Euler(a) => class_command(&a.class, ClassKind::Euler, a.prime),
        Cmd::Persistence(a) => {
            let f = io::filtration(&a.filtration)?;
            let diag = persistent_cohomology(persistence_filtration(&f, a.max_degree), a.prime, a.max_degree)?;
            io::write_to(a.out.as_deref(), |w| write_diagram_csv(&diag, w))
        }
        Cmd::Decompose(a) => {
            let f = io::filtration(&a.filtration)?;
            let z = read_class_csv(io::reader(&a.class)?, f.complex().clone(), Ring::Mod(a.prime))?;
            let degree = z.degree();
            let diag = persistent_cohomology(persistence_filtration(&f, degree), a.prime, degree)?;
            let dec = decompose_class(&z, &diag, a.scale.unwrap_or(f.threshold()))?;
            io::write_to(a.out.as_deref(), |w| write_decoration(&diag, &dec, w))
        }
        Cmd::Pipeline(a) => crate::pipeline::run(a),
    }
}

fn generate(dataset: GenCmd) -> CliResult<()> {
    match dataset {
        GenCmd::DoubleGyre(a) => {
            let flow = DoubleGyre { amplitude: a.amplitude, eps: a.flow_eps, omega: a.omega };
            let traj = gen_double_gyre(flow, (a.x0, a.y0, a.t0), a.samples, a.t_end, a.step)?;
            if let Some(p) = &a.trajectory {
                io::write_to(Some(p), |w| {
                    writeln!(w, "t,x,y")?;
                    traj.iter().try_for_each(|(t, x, y)| writeln!(w, "{t},{x},{y}"))
                })?;
            }
            let xs: Vec<f64> = traj.iter().map(|p| p.1).collect();
            let x = delay_embed(&xs, a.delay_dim, a.delay)?;
            io::write_to(a.out.as_deref(), |w| write_points_csv(&x, w))
        }
        GenCmd::Lines(a) => {
            let cfg = LinesConfig { count: a.count, size: a.size, sigma: a.sigma, max_offset: a.max_offset };
            let x = gen_lines(&cfg)?;
            io::write_to(a.out.as_deref(), |w| write_points_csv(&x, w))
        }
        GenCmd::SphereProjections(a) => {
            let (x, rots) = gen_sphere_projections(a.count, a.size, a.seed)?;
            io::write_to(Some(&a.rotations_out), |w| write_rotations_csv(&rots, w))?;
            io::write_to(a.out.as_deref(), |w| write_points_csv(&x, w))
        }
    }
}

/// A metric space ready for Rips, with whatever produced it.
pub struct Metric {
    pub dissimilarity: DissimilarityMatrix,
    pub points: Option<PointCloud>,
    pub rotations: Option<Vec<Matrix3<f64>>>,
}

pub fn load_metric(input: &MetricInput) -> CliResult<Metric> {
    let given = [input.points.is_some(), input.dissimilarity.is_some(), input.images.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(CliError::Usage("give exactly one of --points, --dissimilarity, --images".into()));
    }
    if let Some(p) = &input.points {
        let x = io::points(p)?;
        return Ok(Metric { dissimilarity: DissimilarityMatrix::euclidean(&x), points: Some(x), rotations: None });
    }
    if let Some(p) = &input.dissimilarity {
        return Ok(Metric { dissimilarity: io::dissimilarity(p)?, points: None, rotations: None });
    }
    let images = io::points(input.images.as_ref().expect("checked above"))?;
    let rots = io::rotations(input.rotations.as_ref().ok_or_else(|| CliError::Usage("--images needs --rotations".into()))?)?;
    Ok(Metric { dissimilarity: aligned_image_dissimilarity(&images, &rots)?, points: Some(images), rotations: Some(rots) })
}

fn class_command(a: &crate::ClassArgs, kind: ClassKind, prime: Option<u32>) -> CliResult<()> {
    let f = io::filtration(&a.filtration)?;
    let omega = io::cocycle(&a.cocycle, &f)?;
    let omega = match a.scale {
        Some(r) => omega.restrict(Arc::new(f.complex_at(r)))?,
        None => omega,
    };
    let z = match kind {
        ClassKind::Sw1 => sw1(&omega)?,
        ClassKind::Sw2 => sw2(&omega)?,
        ClassKind::Euler => {
            let z = euler(&omega)?;
            prime.map_or(z.clone(), |p| reduce_mod(&z, p))
        }
    };
    io::write_to(a.out.as_deref(), |w| write_class_csv(&z, w))
}

/// CSV `v0,v1,v2,birth,defect`, one row per triangle.
pub fn write_defects(omega: &DiscreteCocycle, f: &Filtration, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "v0,v1,v2,birth,defect")?;
    let births = f.births(2);
    for ((t, d), b) in omega.complex().triangles().iter().zip(triangle_defects(omega)).zip(births) {
        let v = t.vertices();
        writeln!(w, "{},{},{},{b},{d}", v[0], v[1], v[2])?;
    }
    Ok(())
}

/// Every bar alive at the decomposition scale with its coefficient; bars
/// with a nonzero coefficient are the decorated ones.
pub fn write_decoration(diag: &PersistenceDiagram, dec: &ClassDecomposition, w: &mut dyn Write) -> std::io::Result<()> {
    let most = diag.most_persistent(dec.degree).map(|b| b.id);
    writeln!(w, "bar_id,degree,birth,death,coefficient,decorated,most_persistent")?;
    for &(id, c) in &dec.coefficients {
        let b = diag.bar(id).expect("decomposition bars come from the diagram");
        let death = if b.is_essential() { "inf".to_string() } else { b.death.to_string() };
        writeln!(w, "{id},{},{},{death},{c},{},{}", b.degree, b.birth, c != 0, most == Some(id))?;
    }
    Ok(())
}
