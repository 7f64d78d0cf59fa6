//! Embedded 5x7 dot-matrix letterforms for the synthetic word task.

use crate::error::{Error, Result};

/// 7 rows of 5 cells; `#` marks an on pixel.
type Glyph = [&'static str; 7];

const GLYPHS: [(char, Glyph); 26] = [
    ('a', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('b', ["####.", "#...#", "####.", "#...#", "#...#", "#...#", "####."]),
    ('c', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('d', ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('e', ["#####", "#....", "####.", "#....", "#....", "#....", "#####"]),
    ('f', ["#####", "#....", "####.", "#....", "#....", "#....", "#...."]),
    ('g', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('h', ["#...#", "#...#", "#####", "#...#", "#...#", "#...#", "#...#"]),
    ('i', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('j', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('k', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('l', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('m', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('n', ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"]),
    ('o', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('p', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('r', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('s', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('t', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('u', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('v', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('w', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"]),
    ('x', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
];

pub const GLYPH_ROWS: usize = 7;
pub const GLYPH_COLS: usize = 5;
/// Rendered image side length.
pub const IMAGE_SIDE: usize = 28;
/// Each glyph cell becomes a 4x4 pixel block; the 20-pixel-wide glyph is
/// centered with 4-pixel margins.
const CELL: usize = 4;
const X_MARGIN: usize = 4;

pub fn glyph(ch: char) -> Result<&'static Glyph> {
    GLYPHS
        .iter()
        .find(|(c, _)| *c == ch)
        .map(|(_, g)| g)
        .ok_or_else(|| Error::structure(format!("no glyph for character {ch:?}")))
}

/// The raw upscaled 28x28 bitmap of a letter: 1.0 on glyph pixels, 0.0 off.
pub fn base_image(ch: char) -> Result<Vec<f64>> {
    let g = glyph(ch)?;
    let mut out = vec![0.0; IMAGE_SIDE * IMAGE_SIDE];
    for (row, line) in g.iter().enumerate() {
        for (col, cell) in line.bytes().enumerate() {
            if cell == b'#' {
                for dr in 0..CELL {
                    for dc in 0..CELL {
                        let r = row * CELL + dr;
                        let c = X_MARGIN + col * CELL + dc;
                        out[r * IMAGE_SIDE + c] = 1.0;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_letter_has_a_well_formed_glyph() {
        for ch in 'a'..='z' {
            let g = glyph(ch).unwrap();
            assert_eq!(g.len(), GLYPH_ROWS);
            for row in g.iter() {
                assert_eq!(row.len(), GLYPH_COLS);
                assert!(row.bytes().all(|b| b == b'#' || b == b'.'));
            }
            // Every glyph has at least a few on pixels.
            let on: usize = g.iter().map(|r| r.bytes().filter(|&b| b == b'#').count()).sum();
            assert!(on >= 5, "{ch} looks empty");
        }
        assert!(glyph('0').is_err());
    }

    #[test]
    fn glyphs_are_distinct() {
        for a in 'a'..='z' {
            for b in 'a'..='z' {
                if a < b {
                    assert_ne!(base_image(a).unwrap(), base_image(b).unwrap(), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn base_image_upsamples_into_the_margins() {
        let img = base_image('l').unwrap();
        assert_eq!(img.len(), 784);
        // 'l': leftmost column on; margins off.
        assert_eq!(img[X_MARGIN], 1.0);
        assert_eq!(img[0], 0.0);
        assert!(img.iter().all(|&v| v == 0.0 || v == 1.0));
    }
}
