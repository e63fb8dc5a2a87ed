//! Binary classification tasks built from a labeled image set (CIFAR-100)
//! or from procedural synthetic archetypes, plus sequence construction.
//!
//! Pixels are kept as bytes in channel-major `[N, 3, H, W]` order and scaled
//! to `[0, 1]` on access, so tasks round-trip exactly through byte containers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::{self, tag, Rng};
use crate::{Error, Real, Result, Tensor};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskRole {
    Initialization,
    Lifelong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    pub role: TaskRole,
    pub height: usize,
    pub width: usize,
    /// `[N, 3, H, W]` bytes; value / 255 is the pixel intensity.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    /// Source classes: label 0 is `class_pair.0`, label 1 is `class_pair.1`.
    pub class_pair: (u32, u32),
    /// Generating archetype for synthetic tasks.
    pub archetype: Option<usize>,
}

impl Task {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels.len() != self.len() * self.image_dim() {
            return Err(Error::shape("task pixels", &[self.len() * self.image_dim()], &[self.pixels.len()]));
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("task labels must be 0 or 1"));
        }
        Ok(())
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// All images as a `[N, 3, H, W]` tensor scaled to `[0, 1]`.
    pub fn images<S: Real>(&self) -> Tensor<S> {
        self.images_at(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn images_at<S: Real>(&self, idx: &[usize]) -> Tensor<S> {
        let d = self.image_dim();
        let inv = S::from_f64(1.0 / 255.0);
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend(self.pixels[i * d..(i + 1) * d].iter().map(|&b| S::from_f64(b as f64) * inv));
        }
        Tensor::from_vec(&[idx.len(), CHANNELS, self.height, self.width], data).expect("consistent task")
    }

    pub fn subset(&self, idx: &[usize], suffix: &str) -> Task {
        let d = self.image_dim();
        let mut pixels = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            pixels.extend_from_slice(&self.pixels[i * d..(i + 1) * d]);
        }
        Task {
            task_id: format!("{}{}", self.task_id, suffix),
            pixels,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone()
        }
    }

    /// Stratified split holding out `eval_fraction` of each label for evaluation.
    pub fn split(&self, eval_fraction: f64, seed: u64) -> Result<(Task, Task)> {
        if !(0.0..1.0).contains(&eval_fraction) {
            return Err(Error::invalid("eval fraction must be in [0, 1)"));
        }
        let mut r = rng::stream(seed, &[tag::SPLIT]);
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for label in 0..2u8 {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
            idx.shuffle(&mut r);
            let k = libm::round(idx.len() as f64 * eval_fraction) as usize;
            eval.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        train.sort_unstable();
        eval.sort_unstable();
        Ok((self.subset(&train, ""), self.subset(&eval, "")))
    }
}

/// Decoded labeled image collection (e.g. the CIFAR-100 training set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImages {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn distinct_labels(&self) -> usize {
        let mut seen = [false; 256];
        self.labels.iter().for_each(|&l| seen[l as usize] = true);
        seen.iter().filter(|&&s| s).count()
    }
}

/// Balanced binary task: `n_per_class` images of `class_a` (label 0) and of `class_b` (label 1).
pub fn make_task(
    data: &LabeledImages,
    class_a: u8,
    class_b: u8,
    n_per_class: usize,
    seed: u64,
    role: TaskRole,
) -> Result<Task> {
    if class_a == class_b {
        return Err(Error::invalid(format!("class_a and class_b are both {class_a}")));
    }
    let mut r = rng::stream(seed, &[tag::TASKS, class_a as u64, class_b as u64]);
    let d = data.image_dim();
    let mut pixels = Vec::with_capacity(2 * n_per_class * d);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, class) in [(0u8, class_a), (1u8, class_b)] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        if idx.len() < n_per_class {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} images, {n_per_class} requested",
                idx.len()
            )));
        }
        idx.shuffle(&mut r);
        idx.truncate(n_per_class);
        idx.sort_unstable();
        for i in idx {
            pixels.extend_from_slice(&data.pixels[i * d..(i + 1) * d]);
            labels.push(label);
        }
    }
    Ok(Task {
        task_id: format!("c{class_a}-c{class_b}"),
        role,
        height: data.height,
        width: data.width,
        pixels,
        labels,
        class_pair: (class_a as u32, class_b as u32),
        archetype: None,
    })
}

/// Number of procedural archetypes.
pub const ARCHETYPES: usize = 5;
/// Variants per archetype; variant 0 is reserved for initialization tasks.
pub const VARIANTS: usize = 8;

pub const ARCHETYPE_NAMES: [&str; ARCHETYPES] = ["blobs", "stripes", "checkers", "rings", "gradients"];

/// Synthetic class ids: archetype `a`, variant `v` yields classes `(a*16+2v, a*16+2v+1)`.
pub fn synthetic_class_pair(archetype: usize, variant: usize) -> (u32, u32) {
    let base = (archetype * 2 * VARIANTS + 2 * variant) as u32;
    (base, base + 1)
}

/// Renders one image of `class` (0 or 1) into `out` as `[3, s, s]` intensities.
fn render(archetype: usize, variant: usize, class: u8, s: usize, r: &mut Rng, out: &mut [f64]) {
    let sf = s as f64;
    let plane = s * s;
    let v = variant as f64;
    let mut put = |x: usize, y: usize, val: f64, tint: [f64; 3]| {
        for ch in 0..CHANNELS {
            out[ch * plane + y * s + x] = val * tint[ch];
        }
    };
    match archetype {
        // bright blob; class decides which half it sits in, odd variants split vertically
        0 => {
            let sigma = sf * (0.10 + 0.02 * (variant % 3) as f64);
            let along = if class == 0 { r.gen_range(0.15..0.4) } else { r.gen_range(0.6..0.85) } * sf;
            let across = r.gen_range(0.25..0.75) * sf;
            let (cx, cy) = if variant % 2 == 0 { (along, across) } else { (across, along) };
            let tint = [1.0, 0.85 - 0.05 * (variant % 4) as f64, 0.3];
            for y in 0..s {
                for x in 0..s {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    put(x, y, 0.1 + 0.85 * libm::exp(-d2 / (2.0 * sigma * sigma)), tint);
                }
            }
        }
        // sinusoidal stripes; horizontal for class 0, vertical for class 1
        1 => {
            let cycles = 2.0 + (variant % 3) as f64;
            let phase = r.gen_range(0.0..2.0 * PI);
            let tint = [0.3, 0.6 + 0.05 * (variant % 4) as f64, 1.0];
            for y in 0..s {
                for x in 0..s {
                    let t = if class == 0 { y } else { x } as f64;
                    put(x, y, 0.5 + 0.45 * libm::sin(2.0 * PI * cycles * t / sf + phase), tint);
                }
            }
        }
        // checkerboard; small cells for class 0, large for class 1
        2 => {
            let cell = ((if class == 0 { sf / 8.0 } else { sf / 4.0 }) as usize).max(1);
            let (ox, oy) = (r.gen_range(0..cell * 2), r.gen_range(0..cell * 2));
            let lo = 0.15 + 0.05 * (variant % 3) as f64;
            let tint = [0.9, 0.9, 0.9 - 0.1 * (variant % 3) as f64];
            for y in 0..s {
                for x in 0..s {
                    let on = ((x + ox) / cell + (y + oy) / cell) % 2 == 0;
                    put(x, y, if on { 0.9 } else { lo }, tint);
                }
            }
        }
        // ring around a jittered center; small radius for class 0, large for class 1
        3 => {
            let radius = sf * if class == 0 { 0.18 } else { 0.36 };
            let width = sf * (0.06 + 0.015 * (variant % 3) as f64);
            let cx = sf / 2.0 + r.gen_range(-0.08..0.08) * sf;
            let cy = sf / 2.0 + r.gen_range(-0.08..0.08) * sf;
            let tint = [0.4 + 0.1 * (variant % 3) as f64, 1.0, 0.5];
            for y in 0..s {
                for x in 0..s {
                    let d = libm::sqrt((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2));
                    put(x, y, 0.05 + 0.9 * libm::exp(-(d - radius).powi(2) / (2.0 * width * width)), tint);
                }
            }
        }
        // linear ramp; rising for class 0, falling for class 1. The axis turns
        // with the variant but stays within a quarter turn, so no variant is
        // the label-inverse of another.
        _ => {
            let angle = PI * v / 16.0 + r.gen_range(-0.1..0.1);
            let (dx, dy) = (libm::cos(angle), libm::sin(angle));
            let slope = if class == 0 { 1.0 } else { -1.0 } * r.gen_range(0.7..1.0);
            let tint = [0.8, 0.4, 0.8 + 0.05 * (variant % 3) as f64];
            for y in 0..s {
                for x in 0..s {
                    let t = ((x as f64 + 0.5) / sf - 0.5) * dx + ((y as f64 + 0.5) / sf - 0.5) * dy;
                    put(x, y, 0.5 + slope * t, tint);
                }
            }
        }
    }
}

/// One synthetic image-level noise draw per pixel keeps tasks from being trivially separable.
const PIXEL_NOISE: f64 = 0.06;

/// Synthetic task of archetype `archetype`, initialization variant 0.
pub fn make_synthetic_task(archetype: usize, n_per_class: usize, seed: u64, image_size: usize) -> Result<Task> {
    make_synthetic_variant(archetype, 0, n_per_class, seed, image_size, TaskRole::Initialization)
}

/// Synthetic task from a specific archetype variant.
pub fn make_synthetic_variant(
    archetype: usize,
    variant: usize,
    n_per_class: usize,
    seed: u64,
    image_size: usize,
    role: TaskRole,
) -> Result<Task> {
    if archetype >= ARCHETYPES {
        return Err(Error::invalid(format!("unknown archetype {archetype} (have {ARCHETYPES})")));
    }
    if variant >= VARIANTS {
        return Err(Error::invalid(format!("unknown variant {variant} (have {VARIANTS})")));
    }
    if image_size < 4 {
        return Err(Error::invalid("synthetic image size must be at least 4"));
    }
    let mut r = rng::stream(seed, &[tag::TASKS, archetype as u64, variant as u64]);
    let d = CHANNELS * image_size * image_size;
    let mut pixels = Vec::with_capacity(2 * n_per_class * d);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    let mut img = vec![0.0; d];
    for class in 0..2u8 {
        for _ in 0..n_per_class {
            render(archetype, variant, class, image_size, &mut r, &mut img);
            for &v in &img {
                let noisy = v + PIXEL_NOISE * (r.gen::<f64>() + r.gen::<f64>() - 1.0);
                pixels.push(libm::round(noisy.clamp(0.0, 1.0) * 255.0) as u8);
            }
            labels.push(class);
        }
    }
    // interleave classes so prefixes of the task stay balanced
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let task = Task {
        task_id: format!("{}-v{variant}", ARCHETYPE_NAMES[archetype]),
        role,
        height: image_size,
        width: image_size,
        pixels,
        labels,
        class_pair: synthetic_class_pair(archetype, variant),
        archetype: Some(archetype),
    };
    Ok(task.subset(&order, ""))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub sequence_id: String,
    pub tasks: Vec<Task>,
}

/// Where tasks come from.
#[derive(Debug, Clone, Copy)]
pub enum TaskSource<'a> {
    Cifar(&'a LabeledImages),
    Synthetic { image_size: usize },
}

/// Sizes of the initialization set and of each lifelong sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequencePlan {
    pub n_init: usize,
    pub n_sequences: usize,
    pub tasks_per_sequence: usize,
    pub init_per_class: usize,
    pub lifelong_per_class: usize,
}

impl Default for SequencePlan {
    fn default() -> Self {
        SequencePlan {
            n_init: 5,
            n_sequences: 5,
            tasks_per_sequence: 10,
            init_per_class: 200,
            lifelong_per_class: 100,
        }
    }
}

/// Builds the initialization tasks and `plan.n_sequences` lifelong sequences.
///
/// Lifelong class pairs never reuse an initialization class. Within one
/// sequence pairs are drawn without replacement.
pub fn build_sequences(source: TaskSource<'_>, plan: &SequencePlan, seed: u64) -> Result<(Vec<Task>, Vec<Sequence>)> {
    let mut r = rng::stream(seed, &[tag::TASKS]);
    match source {
        TaskSource::Synthetic { image_size } => {
            if plan.n_init == 0 || plan.n_init > ARCHETYPES {
                return Err(Error::InsufficientData(format!(
                    "{} initialization tasks requested, {ARCHETYPES} archetypes available",
                    plan.n_init
                )));
            }
            let pool: Vec<(usize, usize)> = (0..plan.n_init)
                .flat_map(|a| (1..VARIANTS).map(move |v| (a, v)))
                .collect();
            if plan.tasks_per_sequence > pool.len() {
                return Err(Error::InsufficientData(format!(
                    "{} tasks per sequence, {} lifelong class pairs available",
                    plan.tasks_per_sequence,
                    pool.len()
                )));
            }
            let init = (0..plan.n_init)
                .map(|a| {
                    make_synthetic_variant(a, 0, plan.init_per_class, rng::derive_seed(seed, &[0, a as u64]), image_size, TaskRole::Initialization)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut sequences = Vec::with_capacity(plan.n_sequences);
            for s in 0..plan.n_sequences {
                let picks: Vec<(usize, usize)> = pool.choose_multiple(&mut r, plan.tasks_per_sequence).copied().collect();
                let tasks = picks
                    .into_iter()
                    .enumerate()
                    .map(|(t, (a, v))| {
                        let task_seed = rng::derive_seed(seed, &[1 + s as u64, t as u64]);
                        make_synthetic_variant(a, v, plan.lifelong_per_class, task_seed, image_size, TaskRole::Lifelong)
                    })
                    .collect::<Result<Vec<_>>>()?;
                sequences.push(Sequence {
                    sequence_id: format!("seq{}", s + 1),
                    tasks,
                });
            }
            Ok((init, sequences))
        }
        TaskSource::Cifar(data) => {
            let mut classes: Vec<u8> = {
                let mut seen = [false; 256];
                data.labels.iter().for_each(|&l| seen[l as usize] = true);
                (0..=255u8).filter(|&c| seen[c as usize]).collect()
            };
            let needed_init = 2 * plan.n_init;
            let needed_seq = 2 * plan.tasks_per_sequence;
            if classes.len() < needed_init + if plan.n_sequences > 0 { needed_seq } else { 0 } {
                return Err(Error::InsufficientData(format!(
                    "{} classes available, need {} for initialization and {} per sequence",
                    classes.len(),
                    needed_init,
                    needed_seq
                )));
            }
            classes.shuffle(&mut r);
            let (init_classes, rest) = classes.split_at(needed_init);
            let init = init_classes
                .chunks(2)
                .map(|p| make_task(data, p[0], p[1], plan.init_per_class, seed, TaskRole::Initialization))
                .collect::<Result<Vec<_>>>()?;
            let mut sequences = Vec::with_capacity(plan.n_sequences);
            for s in 0..plan.n_sequences {
                let picks: Vec<u8> = rest.choose_multiple(&mut r, needed_seq).copied().collect();
                let tasks = picks
                    .chunks(2)
                    .map(|p| make_task(data, p[0], p[1], plan.lifelong_per_class, rng::derive_seed(seed, &[1 + s as u64]), TaskRole::Lifelong))
                    .collect::<Result<Vec<_>>>()?;
                sequences.push(Sequence {
                    sequence_id: format!("seq{}", s + 1),
                    tasks,
                });
            }
            Ok((init, sequences))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_task_is_balanced_and_deterministic() {
        let a = make_synthetic_task(0, 100, 1, 16).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.label_counts(), [100, 100]);
        assert_eq!(a, make_synthetic_task(0, 100, 1, 16).unwrap());
        let b = make_synthetic_task(0, 100, 2, 16).unwrap();
        assert_ne!(a.pixels, b.pixels);
        assert_eq!(a.class_pair, b.class_pair);
    }

    #[test]
    fn unknown_archetype_is_rejected() {
        assert!(make_synthetic_task(ARCHETYPES, 10, 1, 16).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let t = make_synthetic_task(2, 100, 3, 16).unwrap();
        let (train, eval) = t.split(0.25, 9).unwrap();
        assert_eq!(train.label_counts(), [75, 75]);
        assert_eq!(eval.label_counts(), [25, 25]);
    }

    #[test]
    fn make_task_rejects_same_class_and_short_classes() {
        let data = LabeledImages {
            height: 1,
            width: 1,
            pixels: vec![0; 3 * 4],
            labels: vec![0, 0, 1, 1],
        };
        assert!(make_task(&data, 0, 0, 1, 0, TaskRole::Lifelong).is_err());
        assert!(matches!(make_task(&data, 0, 1, 3, 0, TaskRole::Lifelong), Err(Error::InsufficientData(_))));
        let t = make_task(&data, 0, 1, 2, 0, TaskRole::Lifelong).unwrap();
        assert_eq!(t.label_counts(), [2, 2]);
    }

    #[test]
    fn synthetic_sequences_have_disjoint_pairs() {
        let plan = SequencePlan {
            init_per_class: 4,
            lifelong_per_class: 4,
            ..SequencePlan::default()
        };
        let (init, seqs) = build_sequences(TaskSource::Synthetic { image_size: 8 }, &plan, 5).unwrap();
        assert_eq!(init.len(), 5);
        assert_eq!(seqs.len(), 5);
        for s in &seqs {
            assert_eq!(s.tasks.len(), 10);
            for t in &s.tasks {
                assert!(init.iter().all(|i| i.class_pair != t.class_pair));
            }
        }
        let empty = SequencePlan { n_sequences: 0, ..plan };
        let (init, seqs) = build_sequences(TaskSource::Synthetic { image_size: 8 }, &empty, 5).unwrap();
        assert_eq!((init.len(), seqs.len()), (5, 0));
    }
}
