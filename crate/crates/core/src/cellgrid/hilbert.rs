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

//! Hilbert-curve orientation state machine for the cube-face quadtree,
//! precomputed four levels (eight bits of (i,j)) at a time.

use once_cell::sync::Lazy;

pub(super) const LOOKUP_BITS: usize = 4;
pub(super) const SWAP_MASK: u64 = 0x01;
pub(super) const INVERT_MASK: u64 = 0x02;

const LOOKUP_SIZE: usize = 1 << (2 * LOOKUP_BITS + 2);

// Child traversal order of the Hilbert curve within a cell, for each of the
// four orientation states.
const POS_TO_IJ: [[u64; 4]; 4] = [
    [0, 1, 3, 2], // canonical order:    (0,0), (0,1), (1,1), (1,0)
    [0, 2, 3, 1], // axes swapped:       (0,0), (1,0), (1,1), (0,1)
    [3, 2, 0, 1], // bits inverted:      (1,1), (1,0), (0,0), (0,1)
    [3, 1, 0, 2], // swapped & inverted: (1,1), (0,1), (0,0), (1,0)
];

// Orientation adjustment a child cell applies on top of its parent's.
const POS_TO_ORIENTATION: [u64; 4] = [SWAP_MASK, 0, 0, INVERT_MASK | SWAP_MASK];

struct Tables {
    ij_to_pos: [u16; LOOKUP_SIZE],
    pos_to_ij: [u16; LOOKUP_SIZE],
}

static TABLES: Lazy<Tables> = Lazy::new(|| {
    let mut t = Tables {
        ij_to_pos: [0; LOOKUP_SIZE],
        pos_to_ij: [0; LOOKUP_SIZE],
    };
    for orientation in 0..4u64 {
        init_lookup_cell(&mut t, 0, 0, 0, orientation, 0, orientation);
    }
    t
});

fn init_lookup_cell(
    t: &mut Tables,
    level: usize,
    i: u64,
    j: u64,
    orig_orientation: u64,
    pos: u64,
    orientation: u64,
) {
    if level == LOOKUP_BITS {
        let ij = (i << LOOKUP_BITS) + j;
        t.ij_to_pos[((ij << 2) + orig_orientation) as usize] = ((pos << 2) + orientation) as u16;
        t.pos_to_ij[((pos << 2) + orig_orientation) as usize] = ((ij << 2) + orientation) as u16;
        return;
    }
    let r = POS_TO_IJ[orientation as usize];
    for child in 0..4 {
        init_lookup_cell(
            t,
            level + 1,
            (i << 1) + (r[child] >> 1),
            (j << 1) + (r[child] & 1),
            orig_orientation,
            (pos << 2) + child as u64,
            orientation ^ POS_TO_ORIENTATION[child],
        );
    }
}

/// Interleaves four levels of (i,j) bits into Hilbert-curve position bits.
/// Input and output both carry the two orientation bits in the low positions.
#[inline]
pub(super) fn ij_to_pos(key: u64) -> u64 {
    TABLES.ij_to_pos[key as usize] as u64
}

/// Inverse of [`ij_to_pos`].
#[inline]
pub(super) fn pos_to_ij(key: u64) -> u64 {
    TABLES.pos_to_ij[key as usize] as u64
}
