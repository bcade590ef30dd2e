//! Small synthetic datasets in the GTSRB directory layout, for smoke tests
//! and demos without the real download.
//!
//! Class `c` of `n` is a striped patch whose stripes run at `c·180/n` degrees,
//! framed by a plain border that the ROI excludes. Image sizes, stripe phase
//! and pixel noise are drawn from the seed.

use std::fs;
use std::io;
use std::path::Path;

use tsr_core::dataset::CSV_HEADER;
use tsr_core::imgcore::{encode_ppm, ColorSpace, Image};
use tsr_core::rng::XorShift64Star;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub classes: u32,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            train_per_class: 20,
            test_per_class: 6,
            seed: 1,
        }
    }
}

struct Drawn {
    image: Image,
    roi: (usize, usize, usize, usize),
}

fn draw(class: u32, classes: u32, rng: &mut XorShift64Star) -> Drawn {
    let w = 28 + rng.below(21);
    let h = 28 + rng.below(21);
    let margin = 2 + rng.below(3);
    let theta = std::f64::consts::PI * class as f64 / classes as f64;
    let (s, c) = theta.sin_cos();
    let phase = rng.next_f64() * 8.0;
    let tint = (class * 53 % 200) as i32 + 30;
    let noise: Vec<i32> = (0..w * h).map(|_| rng.below(121) as i32 - 60).collect();
    let image = Image::from_fn3(w, h, ColorSpace::Bgr, |x, y| {
        let n = noise[y * w + x];
        let inside = x >= margin && y >= margin && x + margin < w && y + margin < h;
        let px = |v: i32| (v + n).clamp(0, 255) as u8;
        if !inside {
            return [px(128), px(128), px(128)];
        }
        let t = x as f64 * c + y as f64 * s + phase;
        let on = (t / 4.0).rem_euclid(2.0) < 1.0;
        let v = if on { 220 } else { 35 };
        [px(v), px((v + tint) / 2), px(255 - v)]
    });
    Drawn {
        image,
        roi: (margin, margin, w - margin, h - margin),
    }
}

fn csv_row(name: &str, d: &Drawn, class: u32) -> String {
    let (x1, y1, x2, y2) = d.roi;
    format!(
        "{name};{};{};{x1};{y1};{x2};{y2};{class}\n",
        d.image.width(),
        d.image.height()
    )
}

/// Write `Final_Training/Images/<class>/…` and `Final_Test/Images/…` under `root`.
pub fn write_synthetic_gtsrb(root: &Path, cfg: &SynthConfig) -> io::Result<()> {
    let mut rng = XorShift64Star::new(cfg.seed);
    let header = CSV_HEADER.join(";") + "\n";
    let train = root.join("Final_Training").join("Images");
    for class in 0..cfg.classes {
        let dir = train.join(format!("{class:05}"));
        fs::create_dir_all(&dir)?;
        let mut csv = header.clone();
        for k in 0..cfg.train_per_class {
            let d = draw(class, cfg.classes, &mut rng);
            let name = format!("{:05}_{:05}.ppm", k / 30, k % 30);
            fs::write(
                dir.join(&name),
                encode_ppm(&d.image).map_err(io::Error::other)?,
            )?;
            csv += &csv_row(&name, &d, class);
        }
        fs::write(dir.join(format!("GT-{class:05}.csv")), csv)?;
    }
    let test = root.join("Final_Test").join("Images");
    fs::create_dir_all(&test)?;
    let mut csv = header;
    let total = cfg.classes as usize * cfg.test_per_class;
    for k in 0..total {
        let class = (k % cfg.classes as usize) as u32;
        let d = draw(class, cfg.classes, &mut rng);
        let name = format!("{k:05}.ppm");
        fs::write(
            test.join(&name),
            encode_ppm(&d.image).map_err(io::Error::other)?,
        )?;
        csv += &csv_row(&name, &d, class);
    }
    fs::write(test.join("GT-final_test.csv"), csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsr_core::dataset::{load_training_pool, LoadOptions};

    #[test]
    fn tree_loads() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            classes: 3,
            train_per_class: 4,
            test_per_class: 2,
            seed: 9,
        };
        write_synthetic_gtsrb(dir.path(), &cfg).unwrap();
        let pool = load_training_pool(
            &dir.path().join("Final_Training/Images"),
            LoadOptions { roi_crop: true },
        )
        .unwrap();
        assert_eq!(pool.len(), 12);
        let test_csv =
            fs::read_to_string(dir.path().join("Final_Test/Images/GT-final_test.csv")).unwrap();
        assert_eq!(test_csv.lines().count(), 7);
    }

    #[test]
    fn reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::default();
        write_synthetic_gtsrb(a.path(), &cfg).unwrap();
        write_synthetic_gtsrb(b.path(), &cfg).unwrap();
        let f = "Final_Training/Images/00002/00000_00003.ppm";
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}
