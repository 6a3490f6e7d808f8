// Copyright 2005 Google Inc. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Hierarchical discretization of the sphere, compatible with the standard
//! S2 cell decomposition: the six faces of a cube are projected onto the
//! sphere and each face is recursively split into four quadrants indexed
//! along a Hilbert curve.
//!
//! A cell id packs into a `u64`: 3 face bits, then two bits per level of
//! Hilbert-curve child position, then a single sentinel `1` bit, then zero
//! padding. The level is recovered from the position of the lowest set bit.
//! This module exposes levels 0 through [`MAX_LEVEL`]; encoding internally
//! runs on the level-30 leaf grid and truncates.

mod hilbert;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use hilbert::{INVERT_MASK, LOOKUP_BITS, SWAP_MASK};

/// Deepest level this toolkit hands out.
pub const MAX_LEVEL: u8 = 12;
/// Number of cube faces.
pub const NUM_FACES: u8 = 6;
/// Earth surface area used for average cell areas, in km².
pub const EARTH_SURFACE_KM2: f64 = 510_065_622.0;

// Leaf grid of the 64-bit encoding.
const ENCODE_LEVEL: u8 = 30;
const POS_BITS: u32 = 2 * ENCODE_LEVEL as u32 + 1;
const MAX_SIZE: u64 = 1 << ENCODE_LEVEL;

/// A point on the sphere in degrees. Latitude is clamped to [-90, 90] at
/// construction; longitude is normalized into [-180, 180).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLng {
    lat: f64,
    lng: f64,
}

impl LatLng {
    pub fn new(lat: f64, lng: f64) -> Result<Self> {
        if !lat.is_finite() || !lng.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinates ({lat}, {lng})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidArgument(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        Ok(LatLng {
            lat,
            lng: normalize_lng(lng),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lng(&self) -> f64 {
        self.lng
    }

    /// Unit direction vector.
    pub(crate) fn to_xyz(self) -> [f64; 3] {
        let phi = self.lat.to_radians();
        let theta = self.lng.to_radians();
        let cos_phi = phi.cos();
        [theta.cos() * cos_phi, theta.sin() * cos_phi, phi.sin()]
    }

    fn from_xyz(v: [f64; 3]) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()).to_degrees();
        let lng = v[1].atan2(v[0]).to_degrees();
        LatLng {
            lat: lat.clamp(-90.0, 90.0),
            lng: normalize_lng(lng),
        }
    }
}

fn normalize_lng(lng: f64) -> f64 {
    let n = (lng + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return the modulus itself when the dividend is a tiny
    // negative number, which would map to +180.0.
    if n >= 180.0 {
        -180.0
    } else {
        n
    }
}

/// 64-bit hierarchical cell identifier on the cube-face Hilbert curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(u64);

impl CellId {
    /// The unique cell at `level` containing `p`. Boundary points resolve
    /// through the discrete floor rule on the leaf grid.
    pub fn from_latlng(p: LatLng, level: u8) -> Result<Self> {
        check_level(level)?;
        let (face, u, v) = xyz_to_face_uv(p.to_xyz());
        let i = st_to_ij(uv_to_st(u));
        let j = st_to_ij(uv_to_st(v));
        Ok(Self::from_face_ij(face, i, j).parent_unchecked(level))
    }

    /// Raw 64-bit id.
    pub fn id(&self) -> u64 {
        self.0
    }

    /// Subdivision level, derived from the lowest set bit.
    pub fn level(&self) -> u8 {
        ENCODE_LEVEL - (self.0.trailing_zeros() >> 1) as u8
    }

    /// Cube face, in 0..6.
    pub fn face(&self) -> u8 {
        (self.0 >> POS_BITS) as u8
    }

    /// The ancestor at `level`, which must not exceed this cell's level.
    pub fn parent(&self, level: u8) -> Result<Self> {
        if level > self.level() {
            return Err(Error::InvalidArgument(format!(
                "parent level {level} exceeds cell level {}",
                self.level()
            )));
        }
        Ok(self.parent_unchecked(level))
    }

    fn parent_unchecked(&self, level: u8) -> Self {
        let lsb = lsb_for_level(level);
        CellId((self.0 & lsb.wrapping_neg()) | lsb)
    }

    /// Center of the cell, mapped back through the inverse projection.
    pub fn center(&self) -> LatLng {
        let (face, i, j) = self.to_face_ij();
        // Cell centers sit at odd leaf-grid half-steps; which half depends on
        // the Hilbert traversal direction encoded in the id.
        let delta = if self.0 & 1 != 0 {
            1
        } else if (i ^ (self.0 >> 2)) & 1 != 0 {
            2
        } else {
            0
        };
        let si = 2 * i + delta;
        let ti = 2 * j + delta;
        let u = st_to_uv(si as f64 / (2 * MAX_SIZE) as f64);
        let v = st_to_uv(ti as f64 / (2 * MAX_SIZE) as f64);
        LatLng::from_xyz(face_uv_to_xyz(face, u, v))
    }

    /// Hex token: the 16-digit representation of the id with trailing zeros
    /// stripped.
    pub fn token(&self) -> String {
        format!("{:016x}", self.0).trim_end_matches('0').to_string()
    }

    /// Parses a lowercase hex token produced by [`CellId::token`].
    pub fn from_token(token: &str) -> Result<Self> {
        if token.is_empty() || token.len() > 16 {
            return Err(Error::InvalidArgument(format!(
                "malformed cell token {token:?}"
            )));
        }
        if !token.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(Error::InvalidArgument(format!(
                "malformed cell token {token:?}"
            )));
        }
        let raw = u64::from_str_radix(token, 16).map_err(|e| {
            Error::InvalidArgument(format!("malformed cell token {token:?}: {e}"))
        })?;
        let id = CellId(raw << (4 * (16 - token.len())));
        if !id.is_valid() || id.level() > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "token {token:?} is not a valid cell at level <= {MAX_LEVEL}"
            )));
        }
        Ok(id)
    }

    /// Dense class index of this cell among all cells of its level, ordered
    /// along the Hilbert curve: `face * 4^level + position`.
    pub fn class_index(&self) -> usize {
        let level = self.level();
        (self.0 >> (61 - 2 * level as u32)) as usize
    }

    /// Inverse of [`CellId::class_index`] for a given level.
    pub fn from_class_index(level: u8, index: usize) -> Result<Self> {
        check_level(level)?;
        if index as u64 >= num_cells(level) {
            return Err(Error::InvalidArgument(format!(
                "class index {index} out of range for level {level}"
            )));
        }
        let id = ((index as u64) << (61 - 2 * level as u32)) | lsb_for_level(level);
        Ok(CellId(id))
    }

    fn is_valid(&self) -> bool {
        self.face() < NUM_FACES && (self.lsb() & 0x1555_5555_5555_5555) != 0
    }

    fn lsb(&self) -> u64 {
        self.0 & self.0.wrapping_neg()
    }

    /// Leaf cell from discrete face coordinates, interleaving (i,j) into
    /// Hilbert position bits four levels at a time.
    fn from_face_ij(face: u8, i: u64, j: u64) -> Self {
        let mut n = (face as u64) << (POS_BITS - 1);
        let mut bits = face as u64 & SWAP_MASK;
        let mask = (1u64 << LOOKUP_BITS) - 1;
        for k in (0..8).rev() {
            bits += ((i >> (k * LOOKUP_BITS)) & mask) << (LOOKUP_BITS + 2);
            bits += ((j >> (k * LOOKUP_BITS)) & mask) << 2;
            bits = hilbert::ij_to_pos(bits);
            n |= (bits >> 2) << (k * 2 * LOOKUP_BITS);
            bits &= SWAP_MASK | INVERT_MASK;
        }
        CellId(n * 2 + 1)
    }

    /// Discrete face coordinates of a leaf cell adjacent to this cell's
    /// center on the leaf grid.
    fn to_face_ij(&self) -> (u8, u64, u64) {
        let face = self.face();
        let mut i = 0u64;
        let mut j = 0u64;
        let mut orientation = face as u64 & SWAP_MASK;
        let mut nbits = ENCODE_LEVEL as usize - 7 * LOOKUP_BITS; // first iteration: 2 bits
        for k in (0..8).rev() {
            orientation +=
                ((self.0 >> (k * 2 * LOOKUP_BITS + 1)) & ((1 << (2 * nbits)) - 1)) << 2;
            orientation = hilbert::pos_to_ij(orientation);
            i += (orientation >> (LOOKUP_BITS + 2)) << (k * LOOKUP_BITS);
            j += ((orientation >> 2) & ((1 << LOOKUP_BITS) - 1)) << (k * LOOKUP_BITS);
            orientation &= SWAP_MASK | INVERT_MASK;
            nbits = LOOKUP_BITS;
        }
        (face, i, j)
    }
}

fn check_level(level: u8) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside [0, {MAX_LEVEL}]"
        )));
    }
    Ok(())
}

fn lsb_for_level(level: u8) -> u64 {
    1u64 << (2 * (ENCODE_LEVEL - level) as u32)
}

/// Total number of cells at `level`: 6 * 4^level. Formula valid to level 30.
pub fn num_cells(level: u8) -> u64 {
    assert!(level <= ENCODE_LEVEL, "level {level} outside [0, 30]");
    6u64 << (2 * level as u32)
}

/// Average cell area at `level` in km².
pub fn avg_cell_area_km2(level: u8) -> f64 {
    EARTH_SURFACE_KM2 / num_cells(level) as f64
}

/// Convenience free function mirroring [`CellId::from_latlng`].
pub fn cell_from_latlng(p: LatLng, level: u8) -> Result<CellId> {
    CellId::from_latlng(p, level)
}

// ---- cube-face projection ----

/// Face whose axis has the largest absolute component; equal components
/// resolve toward the higher axis, matching the reference decomposition.
fn xyz_to_face_uv(p: [f64; 3]) -> (u8, f64, f64) {
    let (ax, ay, az) = (p[0].abs(), p[1].abs(), p[2].abs());
    let axis = if ax > ay {
        if ax > az {
            0
        } else {
            2
        }
    } else if ay > az {
        1
    } else {
        2
    };
    let mut face = axis as u8;
    if p[axis] < 0.0 {
        face += 3;
    }
    let (u, v) = match face {
        0 => (p[1] / p[0], p[2] / p[0]),
        1 => (-p[0] / p[1], p[2] / p[1]),
        2 => (-p[0] / p[2], -p[1] / p[2]),
        3 => (p[2] / p[0], p[1] / p[0]),
        4 => (p[2] / p[1], -p[0] / p[1]),
        5 => (-p[1] / p[2], -p[0] / p[2]),
        _ => unreachable!(),
    };
    (face, u, v)
}

fn face_uv_to_xyz(face: u8, u: f64, v: f64) -> [f64; 3] {
    match face {
        0 => [1.0, u, v],
        1 => [-u, 1.0, v],
        2 => [-u, -v, 1.0],
        3 => [-1.0, -v, -u],
        4 => [v, -1.0, -u],
        5 => [v, u, -1.0],
        _ => unreachable!(),
    }
}

// Quadratic cell-size correction between cube-face (u,v) in [-1,1] and
// cell-space (s,t) in [0,1].

fn uv_to_st(u: f64) -> f64 {
    if u >= 0.0 {
        0.5 * (1.0 + 3.0 * u).sqrt()
    } else {
        1.0 - 0.5 * (1.0 - 3.0 * u).sqrt()
    }
}

fn st_to_uv(s: f64) -> f64 {
    if s >= 0.5 {
        (1.0 / 3.0) * (4.0 * s * s - 1.0)
    } else {
        (1.0 / 3.0) * (1.0 - 4.0 * (1.0 - s) * (1.0 - s))
    }
}

/// Leaf-grid index of an s/t value; the floor rule makes boundary points
/// resolve deterministically.
fn st_to_ij(s: f64) -> u64 {
    let ij = (MAX_SIZE as f64 * s).floor() as i64;
    ij.clamp(0, MAX_SIZE as i64 - 1) as u64
}
