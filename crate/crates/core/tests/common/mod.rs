//! Independent oracles and fixture generators shared by the integration tests.
//! Nothing here calls the code path it checks.

#![allow(dead_code)]

use std::collections::HashMap;

use damagekit::blend::CloneTask;
use damagekit::eval::EvalPair;
use damagekit::interchange::{Frame, PredictionSet};
use damagekit::tile::TilingPlan;
use damagekit::{BinaryMask, ClassLabel, Instance, PixelRect, PolygonOutline, RasterImage};
use rand::Rng;

/// Classic crossing-number test at one point, edges taken as `(v[k], v[k+1])`.
pub fn pnpoly(vertices: &[[f64; 2]], px: f64, py: f64) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for k in 0..n {
        let [xa, ya] = vertices[k];
        let [xb, yb] = vertices[(k + 1) % n];
        if (ya > py) != (yb > py) && px < (xb - xa) * (py - ya) / (yb - ya) + xa {
            inside = !inside;
        }
    }
    inside
}

pub fn pnpoly_raster(vertices: &[[f64; 2]], width: usize, height: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            out.push(pnpoly(vertices, x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    out
}

pub fn to_bools(mask: &BinaryMask) -> Vec<bool> {
    let (w, h) = mask.size();
    (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| mask.get(x, y)).collect()
}

/// Random polygon inside a margin around a `width`×`height` raster. Half of the
/// coordinates sit on a half-pixel grid so vertices and edges hit pixel centers.
pub fn random_polygon(rng: &mut impl Rng, width: usize, height: usize) -> PolygonOutline {
    let n = rng.random_range(3..=10);
    let snap = rng.random_bool(0.5);
    let coord = |rng: &mut dyn rand::RngCore, extent: usize| {
        let v: f64 = rng.random_range(-3.0..=extent as f64 + 3.0);
        if snap { (v * 2.0).round() / 2.0 } else { v }
    };
    let vertices = (0..n)
        .map(|_| [coord(rng, width), coord(rng, height)])
        .collect();
    PolygonOutline::new(vertices).expect("finite, at least three vertices")
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize, channels: usize) -> RasterImage {
    let data = (0..width * height * channels).map(|_| rng.random()).collect();
    RasterImage::new(width, height, channels, data).unwrap()
}

/// Union of a few random rectangles inside a box of at most `max_area`
/// pixels, kept one pixel clear of the border.
pub fn random_region(rng: &mut impl Rng, width: usize, height: usize, max_area: u64) -> BinaryMask {
    let side = (max_area as f64).sqrt() as usize;
    let bw_max = side.min(width - 2);
    let bw = rng.random_range(bw_max.div_ceil(2)..=bw_max);
    let bh_max = (max_area as usize / bw).min(height - 2);
    let bh = rng.random_range(bh_max.div_ceil(2)..=bh_max);
    let bx = rng.random_range(1..=width - 1 - bw);
    let by = rng.random_range(1..=height - 1 - bh);
    let mut region = BinaryMask::new(width, height);
    for _ in 0..rng.random_range(1..=3) {
        let x0 = rng.random_range(bx..bx + bw);
        let y0 = rng.random_range(by..by + bh);
        let x1 = rng.random_range(x0 + 1..=bx + bw);
        let y1 = rng.random_range(y0 + 1..=by + bh);
        region
            .union_with(&BinaryMask::rectangle(width, height, PixelRect { x0, y0, x1, y1 }))
            .unwrap();
    }
    if rng.random_bool(0.3) {
        let full = PixelRect { x0: bx, y0: by, x1: bx + bw, y1: by + bh };
        region.union_with(&BinaryMask::rectangle(width, height, full)).unwrap();
    }
    region
}

/// Random clone task; the source sometimes ends right at Ω's edge so some
/// guidance neighbors fall outside it.
pub fn random_clone_task(rng: &mut impl Rng, max_area: u64) -> CloneTask {
    let (w, h) = (rng.random_range(6..=40), rng.random_range(6..=40));
    let destination = random_image(rng, w, h, 3);
    let region = random_region(rng, w, h, max_area);
    let r = region.bounding_rect().unwrap();
    let (ml, mt, mr, mb) = (
        rng.random_range(0..3),
        rng.random_range(0..3),
        rng.random_range(0..3),
        rng.random_range(0..3),
    );
    let source = random_image(rng, r.width() + ml + mr, r.height() + mt + mb, 3);
    CloneTask {
        source,
        destination,
        offset: (ml as i64 - r.x0 as i64, mt as i64 - r.y0 as i64),
        region,
    }
}

/// Builds the discrete Poisson system from its definition and solves it by
/// dense Gaussian elimination with partial pivoting. Returns per-pixel values
/// keyed by destination coordinates, three channels each.
pub fn dense_poisson_solve(task: &CloneTask) -> HashMap<(usize, usize), [f64; 3]> {
    let (w, h) = task.destination.size();
    let inside = |x: usize, y: usize| task.region.get(x, y);
    let unknowns: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| inside(x, y))
        .collect();
    let index: HashMap<(usize, usize), usize> =
        unknowns.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let n = unknowns.len();
    let (sw, sh) = task.source.size();
    let src = |x: usize, y: usize, c: usize| -> Option<f64> {
        let sx = x as i64 + task.offset.0;
        let sy = y as i64 + task.offset.1;
        (sx >= 0 && sy >= 0 && (sx as usize) < sw && (sy as usize) < sh)
            .then(|| task.source.sample(sx as usize, sy as usize, c) as f64)
    };

    // augmented matrix: n columns of A, then 3 right-hand sides
    let cols = n + 3;
    let mut m = vec![0.0f64; n * cols];
    for (i, &(x, y)) in unknowns.iter().enumerate() {
        m[i * cols + i] = 4.0;
        for (qx, qy) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
            match index.get(&(qx, qy)) {
                Some(&j) => m[i * cols + j] -= 1.0,
                None => {
                    for c in 0..3 {
                        m[i * cols + n + c] += task.destination.sample(qx, qy, c) as f64;
                    }
                }
            }
            for c in 0..3 {
                if let (Some(gp), Some(gq)) = (src(x, y, c), src(qx, qy, c)) {
                    m[i * cols + n + c] += gp - gq;
                }
            }
        }
    }
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&a, &b| m[a * cols + k].abs().total_cmp(&m[b * cols + k].abs()))
            .unwrap();
        if pivot != k {
            for c in 0..cols {
                m.swap(k * cols + c, pivot * cols + c);
            }
        }
        let d = m[k * cols + k];
        for r in k + 1..n {
            let f = m[r * cols + k] / d;
            if f != 0.0 {
                for c in k..cols {
                    m[r * cols + c] -= f * m[k * cols + c];
                }
            }
        }
    }
    let mut x = vec![[0.0f64; 3]; n];
    for i in (0..n).rev() {
        for c in 0..3 {
            let mut s = m[i * cols + n + c];
            for j in i + 1..n {
                s -= m[i * cols + j] * x[j][c];
            }
            x[i][c] = s / m[i * cols + i];
        }
    }
    unknowns.into_iter().zip(x).collect()
}

fn random_blob(rng: &mut impl Rng, width: usize, height: usize) -> BinaryMask {
    loop {
        let mask = if rng.random_bool(0.5) {
            let x0 = rng.random_range(0..width);
            let y0 = rng.random_range(0..height);
            let x1 = rng.random_range(x0 + 1..=width.min(x0 + width / 2 + 2));
            let y1 = rng.random_range(y0 + 1..=height.min(y0 + height / 2 + 2));
            BinaryMask::rectangle(width, height, PixelRect { x0, y0, x1, y1 })
        } else {
            random_polygon(rng, width, height).rasterize(width, height).unwrap()
        };
        if !mask.is_empty() {
            return mask;
        }
    }
}

const CONFIDENCES: [f64; 6] = [0.0, 0.25, 0.3, 0.5, 0.75, 1.0];

/// One to three images of at most `max_side` pixels per side with random
/// ground truth and predictions, some derived from the ground truth so they overlap.
pub fn random_eval_pairs(rng: &mut impl Rng, max_side: usize) -> Vec<EvalPair> {
    (0..rng.random_range(1..=3))
        .map(|k| {
            let w = rng.random_range(4..=max_side);
            let h = rng.random_range(4..=max_side);
            let class = |rng: &mut dyn rand::RngCore| {
                if rng.random_bool(0.5) { ClassLabel::Damage } else { ClassLabel::Dirt }
            };
            let ground_truth: Vec<Instance> = (0..rng.random_range(0..=4))
                .map(|_| Instance::ground_truth(class(rng), random_blob(rng, w, h)))
                .collect();
            let mut predictions = PredictionSet::new(format!("img{k}"), w, h, Frame::Full);
            for _ in 0..rng.random_range(0..=5) {
                let mask = match ground_truth.get(rng.random_range(0..=ground_truth.len() * 2)) {
                    Some(g) => {
                        let dx = rng.random_range(-3i64..=3);
                        let dy = rng.random_range(-3i64..=3);
                        let m = g.mask.dilate(rng.random_range(0..=2)).placed(w, h, dx, dy);
                        if m.is_empty() { random_blob(rng, w, h) } else { m }
                    }
                    None => random_blob(rng, w, h),
                };
                let confidence = if rng.random_bool(0.5) {
                    CONFIDENCES[rng.random_range(0..CONFIDENCES.len())]
                } else {
                    rng.random_range(0.0..=1.0)
                };
                predictions.instances.push(Instance::prediction(class(rng), mask, confidence));
            }
            EvalPair {
                image_id: format!("img{k}"),
                ground_truth,
                predictions,
            }
        })
        .collect()
}

fn class_ok(class: ClassLabel, filter: Option<ClassLabel>) -> bool {
    filter.is_none_or(|f| f == class)
}

/// `(kept predictions, matched predictions, ground truth, detected ground truth)`
/// by pairwise pixel enumeration.
pub fn brute_overlap_counts(pairs: &[EvalPair], threshold: f64, filter: Option<ClassLabel>) -> [u64; 4] {
    let mut out = [0u64; 4];
    for pair in pairs {
        let preds: Vec<(ClassLabel, Vec<bool>)> = pair
            .predictions
            .instances
            .iter()
            .filter(|p| p.confidence.unwrap() >= threshold && class_ok(p.class, filter))
            .map(|p| (p.class, to_bools(&p.mask)))
            .collect();
        let gts: Vec<(ClassLabel, Vec<bool>)> = pair
            .ground_truth
            .iter()
            .filter(|g| class_ok(g.class, filter))
            .map(|g| (g.class, to_bools(&g.mask)))
            .collect();
        let touch = |a: &(ClassLabel, Vec<bool>), b: &(ClassLabel, Vec<bool>)| {
            a.0 == b.0 && a.1.iter().zip(&b.1).any(|(&p, &q)| p && q)
        };
        out[0] += preds.len() as u64;
        out[1] += preds.iter().filter(|p| gts.iter().any(|g| touch(p, g))).count() as u64;
        out[2] += gts.len() as u64;
        out[3] += gts.iter().filter(|g| preds.iter().any(|p| touch(p, g))).count() as u64;
    }
    out
}

/// `(intersection, union)` summed over images and classes by per-pixel counting.
pub fn brute_area(pairs: &[EvalPair], threshold: f64, filter: Option<ClassLabel>) -> (u64, u64) {
    let (mut inter, mut union) = (0u64, 0u64);
    for pair in pairs {
        let (w, h) = (pair.predictions.width, pair.predictions.height);
        for class in [ClassLabel::Damage, ClassLabel::Dirt] {
            if !class_ok(class, filter) {
                continue;
            }
            for y in 0..h {
                for x in 0..w {
                    let p = pair.predictions.instances.iter().any(|i| {
                        i.class == class && i.confidence.unwrap() >= threshold && i.mask.get(x, y)
                    });
                    let g = pair.ground_truth.iter().any(|i| i.class == class && i.mask.get(x, y));
                    inter += u64::from(p && g);
                    union += u64::from(p || g);
                }
            }
        }
    }
    (inter, union)
}

pub fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Connected components of the same-class overlap graph, computed on pixel
/// vectors: `(class, union, max confidence)`, sorted for comparison.
pub fn brute_merge(instances: &[Instance]) -> Vec<(ClassLabel, Vec<bool>, f64)> {
    let pix: Vec<Vec<bool>> = instances.iter().map(|i| to_bools(&i.mask)).collect();
    let n = instances.len();
    let edge = |a: usize, b: usize| {
        instances[a].class == instances[b].class && pix[a].iter().zip(&pix[b]).any(|(&p, &q)| p && q)
    };
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut union = vec![false; pix[start].len()];
        let mut conf = f64::NEG_INFINITY;
        while let Some(a) = stack.pop() {
            for (u, &p) in union.iter_mut().zip(&pix[a]) {
                *u |= p;
            }
            conf = conf.max(instances[a].confidence.unwrap_or(0.0));
            for b in 0..n {
                if !seen[b] && edge(a, b) {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        groups.push((instances[start].class, union, conf));
    }
    groups.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)).then(a.2.total_cmp(&b.2)));
    groups
}

/// Origins expected on one axis: multiples of the stride that fit, plus the
/// edge-aligned final window when the strided ones stop short.
pub fn expected_origins(extent: usize, window: usize, overlap: usize) -> Vec<usize> {
    let stride = window - overlap;
    let mut v = Vec::new();
    let mut o = 0;
    while o + window <= extent {
        v.push(o);
        o += stride;
    }
    if *v.last().unwrap() + window != extent {
        v.push(extent - window);
    }
    v
}

/// Coverage and overlap invariants of a plan, checked per axis since windows form a grid.
pub fn check_plan(plan: &TilingPlan) -> Result<(), String> {
    let (iw, ih) = plan.image_size;
    let (ww, wh) = plan.window_size;
    let xs = expected_origins(iw, ww, plan.overlap);
    let ys = expected_origins(ih, wh, plan.overlap);
    let expected: Vec<(usize, usize)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let actual: Vec<(usize, usize)> = plan.windows.iter().map(|w| (w.x, w.y)).collect();
    if actual != expected {
        return Err(format!("origins {actual:?} != {expected:?}"));
    }
    for w in &plan.windows {
        if (w.width, w.height) != (ww, wh) || w.x + ww > iw || w.y + wh > ih {
            return Err(format!("window {w:?} out of bounds or wrong size"));
        }
    }
    for (origins, window, extent) in [(&xs, ww, iw), (&ys, wh, ih)] {
        let mut covered = vec![0u32; extent];
        for &o in origins {
            for c in &mut covered[o..o + window] {
                *c += 1;
            }
        }
        if let Some(p) = covered.iter().position(|&c| c == 0) {
            return Err(format!("pixel {p} uncovered on an axis of extent {extent}"));
        }
        for pair in origins.windows(2) {
            if pair[0] >= pair[1] {
                return Err(format!("duplicate or unsorted origins {pair:?}"));
            }
            let shared = (pair[0] + window).saturating_sub(pair[1]);
            if shared < plan.overlap {
                return Err(format!("neighbors {pair:?} share {shared} < {}", plan.overlap));
            }
        }
    }
    Ok(())
}

/// Disjoint same-class instances, each fully inside some window of `plan`.
pub fn contained_instances(rng: &mut impl Rng, plan: &TilingPlan, count: usize) -> Vec<Instance> {
    let (iw, ih) = plan.image_size;
    let mut out: Vec<Instance> = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 50 {
        attempts += 1;
        let win = plan.windows[rng.random_range(0..plan.windows.len())];
        let local = random_blob(rng, win.width, win.height);
        let mask = local.placed(iw, ih, win.x as i64, win.y as i64);
        let class = if rng.random_bool(0.5) { ClassLabel::Damage } else { ClassLabel::Dirt };
        if out
            .iter()
            .any(|o| o.class == class && o.mask.intersects(&mask).unwrap())
        {
            continue;
        }
        out.push(Instance::ground_truth(class, mask));
    }
    out
}
