//! Finitely generated Fuchsian surrogate groups and freely reduced word
//! orbits.
//!
//! Three families are shipped: the trivial group (the disk itself), the
//! infinite cyclic group of a hyperbolic translation along the real axis, and
//! the free rank-2 parabolic group conjugate to the level-2 congruence
//! subgroup of the modular group. All three are free, so distinct reduced
//! words are distinct group elements and orbit enumeration is exact.

use num_complex::Complex64;

use crate::geom::MobiusMap;
use crate::{Error, Result};

/// Default word-length cap for orbit enumeration; rank-2 orbits stay below
/// about 10^6 elements at this depth.
pub const DEFAULT_MAX_WORD_LENGTH: usize = 12;

/// A finitely generated group of disk automorphisms, stored by its
/// generators. `freely_reduced` records whether reduced words over the
/// generators enumerate the group without repetition; every shipped
/// constructor guarantees it, and enumeration refuses groups that do not.
#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    generators: Vec<MobiusMap>,
    label: String,
    freely_reduced: bool,
}

impl FuchsianGroup {
    /// The trivial group; Poincare series over it collapse to a single term.
    pub fn trivial() -> Self {
        Self {
            generators: Vec::new(),
            label: "trivial".to_string(),
            freely_reduced: true,
        }
    }

    /// Infinite cyclic group generated by the hyperbolic translation along
    /// the axis through -1 and 1 with translation length `length`, so the
    /// generator moves 0 to tanh(length).
    pub fn cyclic(length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::NonPositive {
                name: "translation_length",
                value: length,
            });
        }
        let s = length.tanh();
        let generator = MobiusMap::new(Complex64::new(1.0, 0.0), Complex64::new(-s, 0.0))?;
        Ok(Self {
            generators: vec![generator],
            label: format!("cyclic(length={length})"),
            freely_reduced: true,
        })
    }

    /// Free rank-2 group of parabolic maps: the upper-half-plane maps
    /// t -> t + 2 and t -> t / (2t + 1) conjugated into the disk by the
    /// Cayley map t -> (t - i) / (t + i).
    pub fn gamma2() -> Self {
        let i = Complex64::new(0.0, 1.0);
        // Conjugated matrices, in normal form; fixed points 1 and -1 on the
        // circle respectively (images of infinity and 0 under the Cayley map).
        let g1 = MobiusMap::new(i, Complex64::new(0.5, 0.5)).unwrap();
        let g2 = MobiusMap::new(-i, Complex64::new(-0.5, 0.5)).unwrap();
        Self {
            generators: vec![g1, g2],
            label: "gamma2".to_string(),
            freely_reduced: true,
        }
    }

    /// Escape hatch for experiments: a generator set that is *not* known to
    /// be freely reduced. Orbit enumeration rejects such groups.
    pub fn with_relations(generators: Vec<MobiusMap>, label: &str) -> Self {
        Self {
            generators,
            label: label.to_string(),
            freely_reduced: false,
        }
    }

    pub fn generators(&self) -> &[MobiusMap] {
        &self.generators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Number of freely reduced words of length at most `n` over the
    /// generators and their inverses.
    pub fn words_up_to(&self, n: usize) -> usize {
        let k = self.generators.len();
        if k == 0 {
            return 1;
        }
        let a = 2 * k; // alphabet size
        let mut count = 1usize; // empty word
        let mut frontier = a;
        for _ in 1..=n {
            count += frontier;
            frontier *= a - 1;
        }
        count
    }

    /// Enumerates the orbit of `z` under all freely reduced words of length
    /// at most `max_word_length`, in deterministic order: by word length,
    /// then lexicographically in the letter sequence. Letters alternate
    /// generator and inverse: 2j is generator j, 2j+1 its inverse.
    pub fn enumerate_orbit(&self, z: Complex64, max_word_length: usize) -> Result<WordOrbit> {
        crate::geom::require_in_disk(z)?;
        if !self.freely_reduced {
            return Err(Error::UnsupportedGroup {
                label: self.label.clone(),
            });
        }

        let letters: Vec<MobiusMap> = self
            .generators
            .iter()
            .flat_map(|g| [*g, g.inverse()])
            .collect();
        let inverse_of = |letter: usize| letter ^ 1;

        let mut elements = vec![OrbitElement {
            word_length: 0,
            first_letter: usize::MAX,
            image: z,
            derivative: Complex64::new(1.0, 0.0),
        }];
        // Frontier of the previous length; extending on the left keeps both
        // the word reduced (skip the inverse of the old first letter) and the
        // chain rule incremental: (g w)(z) = g(w(z)), (g w)'(z) = g'(w(z)) w'(z).
        let mut frontier: Vec<OrbitElement> = elements.clone();
        for _ in 1..=max_word_length {
            let mut next = Vec::with_capacity(frontier.len() * letters.len());
            for (li, letter) in letters.iter().enumerate() {
                for el in &frontier {
                    if el.first_letter != usize::MAX && inverse_of(li) == el.first_letter {
                        continue;
                    }
                    next.push(OrbitElement {
                        word_length: el.word_length + 1,
                        first_letter: li,
                        image: letter.apply(el.image),
                        derivative: letter.derivative(el.image) * el.derivative,
                    });
                }
            }
            elements.extend(next.iter().copied());
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        Ok(WordOrbit {
            base: z,
            max_word_length,
            elements,
        })
    }
}

/// One enumerated group element applied to the base point: the reduced word
/// length, the image A(z), and the derivative A'(z).
#[derive(Debug, Clone, Copy)]
pub struct OrbitElement {
    pub word_length: usize,
    first_letter: usize,
    pub image: Complex64,
    pub derivative: Complex64,
}

/// Orbit of a base point under freely reduced words up to a length cap.
#[derive(Debug, Clone)]
pub struct WordOrbit {
    pub base: Complex64,
    pub max_word_length: usize,
    pub elements: Vec<OrbitElement>,
}

impl WordOrbit {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Smallest pairwise Euclidean distance between orbit points; discrete
    /// groups acting freely keep this strictly positive at any finite depth.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.elements.len() {
            for j in (i + 1)..self.elements.len() {
                best = best.min((self.elements[i].image - self.elements[j].image).norm());
            }
        }
        best
    }

    /// Minimum hyperbolic distance from `w` to orbit points of each exact
    /// word length; entry `d` of the result covers words of length `d`.
    pub fn frontier_distances(&self, w: Complex64) -> Result<Vec<f64>> {
        let mut out = vec![f64::INFINITY; self.max_word_length + 1];
        for el in &self.elements {
            let d = crate::geom::disk_distance(el.image, w)?;
            if d < out[el.word_length] {
                out[el.word_length] = d;
            }
        }
        out.truncate(
            out.iter()
                .position(|d| d.is_infinite())
                .unwrap_or(out.len()),
        );
        Ok(out)
    }
}
