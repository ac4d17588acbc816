//! Acceptance run: one PASS/FAIL line per criterion, written straight to
//! stderr so it shows up without `--nocapture`.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use dirmorph::flat_morph::{self, MorphParams, ShockConvention};
use dirmorph::image::{
    self, AnyImage, DirectionalImage, GridShape, Image, ScalarImage, StructuringElement,
};
use dirmorph::multiscale::{self, ScaleParams};
use dirmorph::pipeline::{self, GfrpConfig, OpParams, Operation};
use dirmorph::scalar_morph;
use dirmorph::sphere::{
    depth, fisher_median, median_objective, rotate_away, DepthOrdering, MedianConfig, Rotation3,
    Spherical, UnitVector3,
};
use dirmorph::synth::{self, DisplacementSpec, FibreCompositeSpec, SynthRng, TwoFibreSpec};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn unit(rng: &mut SynthRng) -> UnitVector3 {
    let z = 2.0 * rng.uniform() - 1.0;
    let phi = TAU * rng.uniform();
    let r = (1.0 - z * z).sqrt();
    UnitVector3::new(r * phi.cos(), r * phi.sin(), z).unwrap()
}

fn below(rng: &mut SynthRng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

// Random image; every third one draws from a small pool so that equal
// vectors and equal depths occur.
fn random_image(rng: &mut SynthRng, dims: &[usize]) -> DirectionalImage {
    let shape = GridShape::new(dims).unwrap();
    if below(rng, 3) == 0 {
        let pool: Vec<UnitVector3> = (0..4).map(|_| unit(rng)).collect();
        Image::from_fn(shape, |_| pool[below(rng, pool.len())])
    } else {
        Image::from_fn(shape, |_| unit(rng))
    }
}

fn random_dims(rng: &mut SynthRng, max: [usize; 3]) -> Vec<usize> {
    let mut d = vec![1 + below(rng, max[0]), 1 + below(rng, max[1])];
    if below(rng, 2) == 0 {
        d.push(2 + below(rng, max[2] - 1));
    }
    d
}

fn random_se(rng: &mut SynthRng, ndim: usize) -> StructuringElement {
    if below(rng, 4) == 0 {
        let mut offs = vec![[0, 0, 0]];
        for k in 0..ndim {
            let mut o = [0; 3];
            o[k] = 1;
            offs.push(o);
            o[k] = -1;
            offs.push(o);
        }
        StructuringElement::from_offsets(ndim, &offs).unwrap()
    } else {
        let edges: Vec<usize> = (0..ndim).map(|_| [1, 3, 5][below(rng, 3)]).collect();
        StructuringElement::make_box(&edges).unwrap()
    }
}

fn depths(img: &DirectionalImage, mu: &UnitVector3) -> Vec<f64> {
    img.pixels().iter().map(|v| depth(v, mu).value()).collect()
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn shifted(shape: &GridShape, pos: [usize; 3], o: [i32; 3]) -> Option<usize> {
    let e = shape.extents();
    let mut q = [0usize; 3];
    for k in 0..3 {
        let v = pos[k] as i64 + o[k] as i64;
        if v < 0 || v >= e[k] as i64 {
            return None;
        }
        q[k] = v as usize;
    }
    Some(q[0] + e[0] * (q[1] + e[1] * q[2]))
}

// Full-window scan: the least (or greatest) element by depth, ties by longitude.
fn window_oracle(img: &DirectionalImage, p: &MorphParams, greatest: bool) -> DirectionalImage {
    let shape = *img.shape();
    let ord = DepthOrdering::new(p.mu);
    let px = img.pixels();
    Image::from_fn(shape, |pos| {
        let mut cands: Vec<UnitVector3> =
            p.se.offsets()
                .iter()
                .filter_map(|&o| shifted(&shape, pos, o).map(|j| px[j]))
                .collect();
        cands.sort_by(|a, b| {
            let (da, db) = (depth(a, &p.mu).value(), depth(b, &p.mu).value());
            da.total_cmp(&db).then_with(|| ord.tie_cmp(a, b))
        });
        if greatest {
            *cands.last().unwrap()
        } else {
            cands[0]
        }
    })
}

// Every pixel of the domain rotated by min(‖i − j‖²/t, π); best by depth,
// then nearest, then longitude.
fn domain_oracle(
    img: &DirectionalImage,
    mu: &UnitVector3,
    t: f64,
    greatest: bool,
) -> DirectionalImage {
    let shape = *img.shape();
    let ord = DepthOrdering::new(*mu);
    let px = img.pixels();
    Image::from_fn(shape, |pos| {
        let mut best: Option<(f64, i64, UnitVector3)> = None;
        for (j, x) in px.iter().enumerate() {
            let q = shape.position(j);
            let n: i64 = (0..3).map(|k| (q[k] as i64 - pos[k] as i64).pow(2)).sum();
            let a = (n as f64 / t).min(PI);
            let v = if greatest {
                rotate_away(x, mu, a)
            } else {
                dirmorph::sphere::rotate_toward(x, mu, a)
            };
            let d = depth(&v, mu).value();
            let better = match &best {
                None => true,
                Some((bd, bn, bv)) => {
                    let c = d
                        .total_cmp(bd)
                        .then(bn.cmp(&n))
                        .then_with(|| ord.tie_cmp(&v, bv));
                    c == if greatest {
                        Ordering::Greater
                    } else {
                        Ordering::Less
                    }
                }
            };
            if better {
                best = Some((d, n, v));
            }
        }
        best.unwrap().2
    })
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn depth_axioms() -> Outcome {
    let start = Instant::now();
    let mut rng = SynthRng::new(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (x, mu, axis) = (unit(&mut rng), unit(&mut rng), unit(&mut rng));
        let a = Rotation3::from_axis_angle(&axis, TAU * rng.uniform() - PI);
        let d = depth(&x, &mu).value();
        worst = worst.max((depth(&a.apply(&x), &a.apply(&mu)).value() - d).abs());
        if depth(&mu, &mu).value() != 1.0 || depth(&-mu, &mu).value() != 0.0 {
            return Err(format!("extremes not exact for mu = {mu}"));
        }
    }
    if worst > 1e-12 {
        return Err(format!("rotation invariance error {worst:e}"));
    }
    for g in 0..1_000 {
        let (mu, r) = (unit(&mut rng), unit(&mut rng));
        // the great circle through mu along the tangent w, written out directly
        let m = mu.to_array();
        let c = r.dot(&mu);
        let raw = [r.x() - c * m[0], r.y() - c * m[1], r.z() - c * m[2]];
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w = raw.map(|v| v / n);
        let mut prev_circle = f64::INFINITY;
        let mut prev_away = f64::INFINITY;
        for k in 0..=100 {
            let th = PI * k as f64 / 100.0;
            let (s, co) = th.sin_cos();
            let p = UnitVector3::new(
                co * m[0] + s * w[0],
                co * m[1] + s * w[1],
                co * m[2] + s * w[2],
            )
            .unwrap();
            let d = depth(&p, &mu).value();
            let e = depth(&rotate_away(&r, &mu, th), &mu).value();
            if d > prev_circle || e > prev_away {
                return Err(format!("depth rose along geodesic {g} at step {k}"));
            }
            prev_circle = d;
            prev_away = e;
        }
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("max invariance error {worst:.1e}, {took:.2?}"))
}

fn commutation() -> Outcome {
    let start = Instant::now();
    let mut rng = SynthRng::new(2);
    type Pair = (
        fn(&DirectionalImage, &MorphParams) -> DirectionalImage,
        fn(&ScalarImage, &StructuringElement) -> ScalarImage,
    );
    let ops: [(&str, Pair); 4] = [
        ("erode", (flat_morph::erode, scalar_morph::scalar_erode)),
        ("dilate", (flat_morph::dilate, scalar_morph::scalar_dilate)),
        ("open", (flat_morph::open, scalar_morph::scalar_open)),
        ("close", (flat_morph::close, scalar_morph::scalar_close)),
    ];
    for n in 0..200 {
        let dims = random_dims(&mut rng, [16, 16, 8]);
        let img = random_image(&mut rng, &dims);
        let p = MorphParams::new(unit(&mut rng), random_se(&mut rng, dims.len()));
        let field = img.depth_field(&p.mu);
        for (name, (vector_op, scalar_op)) in &ops {
            let lhs = depths(&vector_op(&img, &p), &p.mu);
            let rhs = scalar_op(&field, &p.se);
            if !same_bits(&lhs, rhs.pixels()) {
                return Err(format!("{name} differs on image {n} ({dims:?})"));
            }
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!("200 images, 4 operators bitwise equal, {took:.2?}"))
}

fn ordering_chains() -> Outcome {
    let mut rng = SynthRng::new(3);
    let mut worst_ms: f64 = 0.0;
    for n in 0..250 {
        let dims = if n < 200 {
            random_dims(&mut rng, [16, 16, 8])
        } else {
            vec![7, 7]
        };
        let img = random_image(&mut rng, &dims);
        let mu = unit(&mut rng);
        let p = MorphParams::new(mu, random_se(&mut rng, dims.len()));
        let chain = [
            depths(&flat_morph::erode(&img, &p), &mu),
            depths(&flat_morph::open(&img, &p), &mu),
            depths(&img, &mu),
            depths(&flat_morph::close(&img, &p), &mu),
            depths(&flat_morph::dilate(&img, &p), &mu),
        ];
        for w in chain.windows(2) {
            if w[0].iter().zip(&w[1]).any(|(a, b)| a > b) {
                return Err(format!("flat chain broken on image {n}"));
            }
        }
        let sp = ScaleParams::new(mu, [0.3, 1.0, 3.0][n % 3]).unwrap();
        let lo = depths(&multiscale::ms_erode(&img, &sp), &mu);
        let hi = depths(&multiscale::ms_dilate(&img, &sp), &mu);
        for i in 0..lo.len() {
            worst_ms = worst_ms.max(lo[i] - chain[2][i]).max(chain[2][i] - hi[i]);
        }
    }
    if worst_ms > 1e-12 {
        return Err(format!("multi-scale chain violated by {worst_ms:e}"));
    }
    Ok(format!(
        "250 images, flat exact, multi-scale worst excess {:.1e}",
        worst_ms.max(0.0)
    ))
}

fn idempotence() -> Outcome {
    let mut rng = SynthRng::new(4);
    for n in 0..100 {
        let dims = random_dims(&mut rng, [16, 16, 8]);
        let img = random_image(&mut rng, &dims);
        let p = MorphParams::new(unit(&mut rng), random_se(&mut rng, dims.len()));
        let o = flat_morph::open(&img, &p);
        let c = flat_morph::close(&img, &p);
        if flat_morph::open(&o, &p) != o || flat_morph::close(&c, &p) != c {
            return Err(format!("not idempotent on image {n}"));
        }
    }
    Ok("100 images, exact vector equality".into())
}

fn brute_force() -> Outcome {
    let mut rng = SynthRng::new(5);
    for n in 0..50 {
        let img = random_image(&mut rng, &[7, 7]);
        let mu = unit(&mut rng);
        let p = MorphParams::new(mu, random_se(&mut rng, 2));
        if flat_morph::erode(&img, &p) != window_oracle(&img, &p, false)
            || flat_morph::dilate(&img, &p) != window_oracle(&img, &p, true)
        {
            return Err(format!(
                "flat operator differs from window scan on image {n}"
            ));
        }
        for t in [0.3, 1.0, 3.0] {
            let sp = ScaleParams::new(mu, t).unwrap();
            if multiscale::ms_erode(&img, &sp) != domain_oracle(&img, &mu, t, false)
                || multiscale::ms_dilate(&img, &sp) != domain_oracle(&img, &mu, t, true)
            {
                return Err(format!(
                    "multi-scale operator differs from domain scan on image {n}, t = {t}"
                ));
            }
        }
    }
    Ok("50 images of 7x7, flat and t in {0.3, 1, 3} exact".into())
}

fn semigroup() -> Outcome {
    let mut rng = SynthRng::new(6);
    let (mut worst_grid, mut worst_exact): (f64, f64) = (0.0, 0.0);
    let mut drawn = 0;
    while drawn < 100 {
        let t = 0.2 + 4.8 * rng.uniform();
        let s = 0.2 + 4.8 * rng.uniform();
        let offset: Vec<f64> = (0..2).map(|_| 6.0 * rng.uniform() - 3.0).collect();
        let n2: f64 = offset.iter().map(|o| o * o).sum();
        if n2 / t >= PI || n2 / s >= PI {
            continue;
        }
        drawn += 1;
        let target = multiscale::alpha(&offset, t + s).unwrap();
        let step = multiscale::default_grid_step(&offset);
        let grid = multiscale::alpha_infimal_convolution(t, s, &offset, step).unwrap();
        worst_grid = worst_grid.max((grid - target).abs());
        worst_exact = worst_exact.max(
            (multiscale::alpha_infimal_convolution_analytic(t, s, &offset).unwrap() - target).abs(),
        );
        let mut o3 = offset.clone();
        o3.push(rng.uniform() - 0.5);
        let n3: f64 = o3.iter().map(|o| o * o).sum();
        if n3 / t < PI && n3 / s < PI {
            let target = multiscale::alpha(&o3, t + s).unwrap();
            worst_exact = worst_exact.max(
                (multiscale::alpha_infimal_convolution_analytic(t, s, &o3).unwrap() - target).abs(),
            );
        }
    }
    if worst_grid > 1e-4 || worst_exact > 1e-12 {
        return Err(format!(
            "discrete error {worst_grid:e}, analytic error {worst_exact:e}"
        ));
    }
    Ok(format!(
        "100 draws, discrete error {worst_grid:.1e}, analytic error {worst_exact:.1e}"
    ))
}

fn scale_limits() -> Outcome {
    let spec = TwoFibreSpec::canonical(7);
    let img = synth::gen_two_fibre(&spec).unwrap();
    let tiny = ScaleParams::new(spec.mu, 1e-6).unwrap();
    if multiscale::ms_erode(&img, &tiny) != img || multiscale::ms_dilate(&img, &tiny) != img {
        return Err("t = 1e-6 is not the identity".into());
    }
    let mut worst: f64 = 0.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for t in [0.1, 0.5, 0.7, 0.9, 1.1, 2.0] {
        let sp = ScaleParams::new(spec.mu, t).unwrap();
        let e = depths(&multiscale::ms_erode(&img, &sp), &spec.mu);
        let d = depths(&multiscale::ms_dilate(&img, &sp), &spec.mu);
        if let Some((pe, pd)) = &prev {
            for i in 0..e.len() {
                worst = worst.max(e[i] - pe[i]).max(pd[i] - d[i]);
            }
        }
        prev = Some((e, d));
    }
    if worst > 1e-12 {
        return Err(format!("depth not monotone in t, excess {worst:e}"));
    }
    Ok(format!(
        "identity at 1e-6, monotone over the ladder (excess {:.1e})",
        worst.max(0.0)
    ))
}

fn two_fibre_claims() -> Outcome {
    let start = Instant::now();
    let spec = TwoFibreSpec::canonical(8);
    let img = synth::gen_two_fibre(&spec).unwrap();
    let mu = spec.mu;
    // depth at the angular midpoint between the two bands
    let mid_angle = 0.5 * (spec.fg_band.hi() + spec.bg_band.lo());
    let mid = 0.5 * (1.0 + mid_angle.cos());
    let p5 = MorphParams::new(mu, StructuringElement::make_box(&[5, 5]).unwrap());

    let opened = depths(&flat_morph::open(&img, &p5), &mu);
    let small = spec.object_pixels(0);
    let large = spec.object_pixels(1);
    let small_gone = small.iter().filter(|&&i| opened[i] < mid).count();
    let large_kept = large.iter().filter(|&&i| opened[i] >= mid).count();
    let closed = depths(&flat_morph::close(&img, &p5), &mu);
    let hole = spec.hole_pixels();
    let filled = hole.iter().filter(|&&i| closed[i] >= mid).count();

    // The fixture's bands leave no depths in (0.70, 0.95), so the shock claim
    // is also measured on a copy whose left edge ramps between the bands.
    let intermediate = |d: &[f64]| d.iter().filter(|&&v| v > 0.70 && v < 0.95).count();
    let ord = DepthOrdering::new(mu);
    let mut rng = SynthRng::new(8);
    let ramped = Image::from_fn(*img.shape(), |p| {
        let (fg, bg) = (spec.fg_band.hi() / 2.0, PI / 2.0);
        let theta = match p[0] {
            0..=9 => bg,
            10..=17 => bg + (fg - bg) * (p[0] - 9) as f64 / 9.0,
            _ => fg,
        };
        ord.from_spherical(Spherical {
            theta,
            phi: TAU * rng.uniform(),
        })
    });
    let p3 = MorphParams::new(mu, StructuringElement::make_box(&[3, 3]).unwrap());
    let mut before = Vec::new();
    let mut after = Vec::new();
    for im in [&img, &ramped] {
        before.push(intermediate(&depths(im, &mu)));
        after.push(
            [ShockConvention::Paper, ShockConvention::Classical]
                .map(|c| intermediate(&depths(&flat_morph::shock(im, &p3, c), &mu))),
        );
    }

    let took = within(Duration::from_secs(10), start)?;
    let detail = format!(
        "small removed {small_gone}/{}, large kept {:.1}%, hole filled {filled}/{}, \
         intermediate {} -> {:?} and ramped {} -> {:?} (paper, classical), {took:.2?}",
        small.len(),
        100.0 * large_kept as f64 / large.len() as f64,
        hole.len(),
        before[0],
        after[0],
        before[1],
        after[1]
    );
    if small_gone == small.len()
        && large_kept as f64 >= 0.6 * large.len() as f64
        && filled == hole.len()
        && (0..2).all(|k| after[k].iter().all(|&a| a <= before[k]))
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pipelines() -> Outcome {
    let start = Instant::now();
    let spec = FibreCompositeSpec::canonical(9);
    let vol = synth::gen_fibre_composite(&spec).unwrap();
    let cfg = GfrpConfig::defaults(3).unwrap();
    let mask = pipeline::gfrp_segment(&vol, &cfg).unwrap();
    let shape = *vol.shape();
    let agree = (0..shape.len())
        .filter(|&i| (mask.pixels()[i] == 1.0) == spec.in_slab(shape.position(i)))
        .count();
    let agreement = agree as f64 / shape.len() as f64;

    let fx =
        synth::gen_displacement_fixture(&DisplacementSpec::new(GridShape::d2(64, 64).unwrap(), 9))
            .unwrap();
    let mut p = OpParams::new(UnitVector3::E_Z);
    p.se = Some(StructuringElement::make_box(&[3, 3]).unwrap());
    let (grad, mags) =
        pipeline::displacement_enhance(&fx.directions, &fx.magnitudes, Operation::Gradient, &p)
            .unwrap();
    let grad = grad.into_scalar().unwrap();
    if mags != fx.magnitudes {
        return Err("magnitudes changed".into());
    }
    let band = fx.fault_band();
    let mean = |on: bool| {
        let v: Vec<f64> = (0..band.len())
            .filter(|&i| band[i] == on)
            .map(|i| grad.pixels()[i])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let ratio = mean(true) / mean(false);
    let took = within(Duration::from_secs(60), start)?;
    let detail = format!(
        "gfrp agreement {:.2}%, fault/off-band gradient ratio {ratio:.1}, {took:.2?}",
        100.0 * agreement
    );
    if agreement >= 0.95 && ratio >= 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Fibonacci lattice search followed by a shrinking compass search in the
// tangent plane.
fn median_oracle(sample: &[UnitVector3]) -> f64 {
    let n = 20_000;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut best = UnitVector3::E_Z;
    let mut f = f64::INFINITY;
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        let g = UnitVector3::new(r * phi.cos(), r * phi.sin(), z).unwrap();
        let v = median_objective(sample, &g);
        if v < f {
            f = v;
            best = g;
        }
    }
    let mut h = 0.05;
    while h > 1e-11 {
        let b = best.to_array();
        let seed = if b[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let u = cross(b, seed);
        let u = scale(u, 1.0 / norm(u));
        let w = cross(b, u);
        let mut moved = false;
        for k in 0..8 {
            let a = k as f64 * PI / 4.0;
            let dir = [0, 1, 2].map(|i| a.cos() * u[i] + a.sin() * w[i]);
            let c = [0, 1, 2].map(|i| b[i] + h * dir[i]);
            let g = UnitVector3::new(c[0], c[1], c[2]).unwrap();
            let v = median_objective(sample, &g);
            if v < f {
                f = v;
                best = g;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    f
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    a.map(|v| v * s)
}

fn median() -> Outcome {
    let mut rng = SynthRng::new(10);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let centre = unit(&mut rng);
        let spread = 0.1 + (PI - 0.1) * rng.uniform();
        let ord = DepthOrdering::new(centre);
        let sample: Vec<UnitVector3> = (0..100)
            .map(|_| {
                let theta = (1.0 - rng.uniform() * (1.0 - spread.cos())).acos();
                ord.from_spherical(Spherical {
                    theta,
                    phi: TAU * rng.uniform(),
                })
            })
            .collect();
        let m = fisher_median(&sample, &MedianConfig::default())
            .map_err(|e| format!("sample {k}: {e}"))?;
        let gap = median_objective(&sample, &m) - median_oracle(&sample);
        worst = worst.max(gap.abs());
    }
    let triple: Vec<UnitVector3> = (0..3)
        .map(|k| {
            Spherical {
                theta: 0.2,
                phi: TAU * k as f64 / 3.0,
            }
            .to_unit()
        })
        .collect();
    let pole = fisher_median(&triple, &MedianConfig::default()).map_err(|e| e.to_string())?;
    let miss = pole.angle_to(&UnitVector3::E_Z);
    let detail = format!("worst objective gap {worst:.1e}, three-point pole error {miss:.1e}");
    if worst <= 1e-6 && miss <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn formats() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);
    let mut rng = SynthRng::new(11);
    for (n, dims) in [vec![5, 4], vec![3, 4, 5]].into_iter().enumerate() {
        let img = AnyImage::Directional(random_image(&mut rng, &dims));
        let (a, b) = (path(&format!("a{n}.dvf")), path(&format!("b{n}.dvf")));
        image::save(&a, &img).map_err(|e| e.to_string())?;
        let once = image::load(&a).map_err(|e| e.to_string())?;
        image::save(&b, &once).map_err(|e| e.to_string())?;
        let twice = image::load(&b).map_err(|e| e.to_string())?;
        if std::fs::read(&a).unwrap() != std::fs::read(&b).unwrap() || once != twice {
            return Err(format!("DVF round trip not bit-exact for {dims:?}"));
        }
        let c = path(&format!("c{n}.csv"));
        image::save(&c, &img).map_err(|e| e.to_string())?;
        if image::load(&c).map_err(|e| e.to_string())? != img {
            return Err(format!("CSV round trip not value-exact for {dims:?}"));
        }
        // f32-representable scalars survive DVF untouched
        let s = AnyImage::Scalar(Image::from_fn(GridShape::new(&dims).unwrap(), |_| {
            rng.uniform() as f32 as f64
        }));
        let sp = path(&format!("s{n}.dvf"));
        image::save(&sp, &s).map_err(|e| e.to_string())?;
        if image::load(&sp).map_err(|e| e.to_string())? != s {
            return Err(format!("scalar DVF round trip changed values for {dims:?}"));
        }
    }
    let bad = path("bad.dvf");
    let mut bytes = std::fs::read(path("a0.dvf")).unwrap();
    bytes[..4].copy_from_slice(b"DVF2");
    std::fs::write(&bad, bytes).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dirmorph"))
        .arg("convert")
        .arg(&bad)
        .arg(path("never.csv"))
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.code() != Some(1) || out.stderr.is_empty() || path("never.csv").exists() {
        return Err(format!("malformed magic gave {:?}", out.status.code()));
    }
    Ok("DVF bit-exact, CSV value-exact, bad magic exits 1".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 11] = [
        ("depth axioms", depth_axioms),
        ("commutation with scalar morphology", commutation),
        ("ordering chains", ordering_chains),
        ("idempotence", idempotence),
        ("brute-force equivalence", brute_force),
        ("semigroup", semigroup),
        ("scale-space limits", scale_limits),
        ("two-fibre fixture", two_fibre_claims),
        ("pipelines", pipelines),
        ("fisher median", median),
        ("formats", formats),
    ];
    let mut failed = Vec::new();
    writeln!(std::io::stderr()).unwrap();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (verdict, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(k + 1);
                ("FAIL", d)
            }
        };
        writeln!(std::io::stderr(), "{verdict} [{}] {name}: {detail}", k + 1).unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
