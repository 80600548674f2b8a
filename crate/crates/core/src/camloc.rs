//! Person localization from class activation maps.
//!
//! A counting classifier predicts how many people are in a frame; its
//! activation map is binarized, split into 8-connected components, and the
//! predicted count decides how component centroids (or pixels sampled from
//! large components) become person locations.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::PointAnnotation;
use crate::grid::{self, GridError, CAM_TAG};

/// Binarization threshold on a 0-255 activation scale.
pub const DEFAULT_BINARY_THRESHOLD: f64 = 27.0;

#[derive(Debug, Error)]
pub enum CamError {
    #[error("activation map has {found} values, expected {width}x{height}")]
    ShapeMismatch {
        width: usize,
        height: usize,
        found: usize,
    },
    #[error("activation map must have positive dimensions")]
    Empty,
    #[error("activation value at index {0} is not finite")]
    NonFinite(usize),
    #[error("cannot sample from an empty component")]
    EmptyComponent,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Dense score grid, row-major, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ActivationMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, CamError> {
        if width == 0 || height == 0 {
            return Err(CamError::Empty);
        }
        if values.len() != width * height {
            return Err(CamError::ShapeMismatch {
                width,
                height,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CamError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, CamError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Multiplies every value by `factor`, e.g. 255 for maps stored in [0, 1].
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CamError> {
        let g = grid::read_grid(path, CAM_TAG)?;
        Self::new(g.width, g.height, g.values)
    }

    pub fn to_text(&self) -> String {
        grid::render_grid(CAM_TAG, self.width, self.height, &self.values)
    }

    /// Maps a pixel to the normalized coordinate of its center.
    pub fn pixel_to_point(&self, x: usize, y: usize) -> PointAnnotation {
        PointAnnotation::at(
            (x as f64 + 0.5) / self.width as f64,
            (y as f64 + 0.5) / self.height as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// `true` where the activation is strictly above `threshold`.
pub fn binarize(map: &ActivationMap, threshold: f64) -> Mask {
    Mask {
        width: map.width,
        height: map.height,
        cells: map.values.iter().map(|&v| v > threshold).collect(),
    }
}

/// An 8-connected region of the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Member pixels `(x, y)` in discovery order.
    pub pixels: Vec<(usize, usize)>,
    /// Normalized centroid: mean pixel position shifted to pixel centers.
    pub centroid: (f64, f64),
    /// `(min_y, min_x)` of the first pixel met in a row-major scan.
    pub anchor: (usize, usize),
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn centroid_point(&self) -> PointAnnotation {
        PointAnnotation::at(self.centroid.0, self.centroid.1)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pixels.contains(&(x, y))
    }
}

/// Labels the 8-connected components of `mask`. Components are returned in
/// row-major order of their first pixel, i.e. sorted by `(min y, min x)`.
pub fn find_components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.cells[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        let n = pixels.len() as f64;
        let (sx, sy) = pixels
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
        out.push(Component {
            centroid: ((sx / n + 0.5) / w as f64, (sy / n + 0.5) / h as f64),
            anchor: (start / w, start % w),
            pixels,
        });
    }
    out
}

/// Draws `n` member pixels of `component`: without replacement when the
/// component has at least `n` pixels, with replacement otherwise.
pub fn sample_inside(
    component: &Component,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>, CamError> {
    let area = component.area();
    if area == 0 {
        return Err(CamError::EmptyComponent);
    }
    if area >= n {
        Ok(index::sample(rng, area, n)
            .into_iter()
            .map(|i| component.pixels[i])
            .collect())
    } else {
        Ok((0..n)
            .map(|_| component.pixels[rng.random_range(0..area)])
            .collect())
    }
}

/// Seeded convenience wrapper around [`sample_inside`].
pub fn sample_inside_seeded(
    component: &Component,
    n: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>, CamError> {
    sample_inside(component, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Which rule produced the locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Predicted count is zero.
    NoPeople,
    /// One component per person: every centroid.
    Exact,
    /// More components than people: centroids of the largest ones.
    Largest,
    /// Fewer components than people: large components are split by
    /// sampling member pixels.
    Split,
    /// Nothing survived binarization; the global peak is repeated.
    EmptyMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub points: Vec<PointAnnotation>,
    pub branch: Branch,
    /// Number of components found after binarization.
    pub components: usize,
    /// Points removed (negative) or added (positive) to hit the requested
    /// count after the split rule.
    pub adjustment: isize,
}

impl Localization {
    pub fn is_degenerate(&self) -> bool {
        self.branch == Branch::EmptyMask
    }
}

fn round_half_away(v: f64) -> usize {
    v.round().max(0.0) as usize
}

/// Locates `num_instances` people in an activation map.
///
/// * equal component and person counts: every component centroid;
/// * more components: centroids of the `num_instances` largest components
///   (area ties keep scan order);
/// * fewer components: each component is assigned
///   `round(area / (total_area / num_instances))` people. Components
///   assigned at most one person contribute their centroid, the others that
///   many uniformly sampled member pixels. The result is then truncated
///   (latest points first) or topped up with samples from the largest
///   component so exactly `num_instances` points come back.
///
/// An empty mask yields `num_instances` copies of the global maximum pixel.
pub fn locate_people(
    map: &ActivationMap,
    binary_threshold: f64,
    num_instances: usize,
    seed: u64,
) -> Localization {
    if num_instances == 0 {
        return Localization {
            points: Vec::new(),
            branch: Branch::NoPeople,
            components: 0,
            adjustment: 0,
        };
    }
    let components = find_components(&binarize(map, binary_threshold));
    let n_comp = components.len();

    if components.is_empty() {
        let mut peak = 0;
        for (i, &v) in map.values.iter().enumerate() {
            if v > map.values[peak] {
                peak = i;
            }
        }
        let p = map.pixel_to_point(peak % map.width, peak / map.width);
        return Localization {
            points: vec![p; num_instances],
            branch: Branch::EmptyMask,
            components: 0,
            adjustment: 0,
        };
    }

    if n_comp == num_instances {
        return Localization {
            points: components.iter().map(Component::centroid_point).collect(),
            branch: Branch::Exact,
            components: n_comp,
            adjustment: 0,
        };
    }

    if num_instances < n_comp {
        let mut order: Vec<usize> = (0..n_comp).collect();
        // stable: equal areas keep (min y, min x) order
        order.sort_by(|&a, &b| components[b].area().cmp(&components[a].area()));
        return Localization {
            points: order[..num_instances]
                .iter()
                .map(|&i| components[i].centroid_point())
                .collect(),
            branch: Branch::Largest,
            components: n_comp,
            adjustment: 0,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_area: usize = components.iter().map(Component::area).sum();
    let avg = total_area as f64 / num_instances as f64;
    let mut points = Vec::with_capacity(num_instances);
    for c in &components {
        let people = round_half_away(c.area() as f64 / avg);
        if people <= 1 {
            points.push(c.centroid_point());
        } else {
            let picks = sample_inside(c, people, &mut rng).expect("components are non-empty");
            points.extend(picks.into_iter().map(|(x, y)| map.pixel_to_point(x, y)));
        }
    }

    let emitted = points.len() as isize;
    if points.len() > num_instances {
        points.truncate(num_instances);
    } else if points.len() < num_instances {
        let largest = components
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.area().cmp(&b.area()).then(j.cmp(i)))
            .map(|(_, c)| c)
            .expect("at least one component");
        let extra = sample_inside(largest, num_instances - points.len(), &mut rng)
            .expect("components are non-empty");
        points.extend(extra.into_iter().map(|(x, y)| map.pixel_to_point(x, y)));
    }
    Localization {
        adjustment: num_instances as isize - emitted,
        points,
        branch: Branch::Split,
        components: n_comp,
    }
}
