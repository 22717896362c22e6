//! 5x7 bitmap glyphs for overlay labels. Only the letters the labels use.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Rows top to bottom; bit 4 is the leftmost column.
fn glyph(c: char) -> Option<[u8; GLYPH_H]> {
    Some(match c {
        'e' => [0b00000, 0b00000, 0b01110, 0b10001, 0b11111, 0b10000, 0b01110],
        'h' => [0b10000, 0b10000, 0b10110, 0b11001, 0b10001, 0b10001, 0b10001],
        'k' => [0b10000, 0b10000, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010],
        'l' => [0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        'm' => [0b00000, 0b00000, 0b11010, 0b10101, 0b10101, 0b10001, 0b10001],
        'o' => [0b00000, 0b00000, 0b01110, 0b10001, 0b10001, 0b10001, 0b01110],
        'r' => [0b00000, 0b00000, 0b10110, 0b11001, 0b10000, 0b10000, 0b10000],
        's' => [0b00000, 0b00000, 0b01110, 0b10000, 0b01110, 0b00001, 0b11110],
        't' => [0b01000, 0b01000, 0b11100, 0b01000, 0b01000, 0b01001, 0b00110],
        'u' => [0b00000, 0b00000, 0b10001, 0b10001, 0b10001, 0b10011, 0b01101],
        'z' => [0b00000, 0b00000, 0b11111, 0b00010, 0b00100, 0b01000, 0b11111],
        _ => return None,
    })
}

/// Set pixels of `text` with its top-left corner at `(x, y)`. Unknown
/// characters advance without drawing.
pub fn text_pixels(text: &str, x: i64, y: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for (k, c) in text.chars().enumerate() {
        let Some(rows) = glyph(c) else { continue };
        let ox = x + (k * (GLYPH_W + 1)) as i64;
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                    out.push((ox + col as i64, y + r as i64));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_letters_exist() {
        for c in "shooter smoke muzzle".chars().filter(|c| *c != ' ') {
            assert!(glyph(c).is_some(), "{c}");
        }
    }

    #[test]
    fn glyphs_advance_by_six() {
        let a = text_pixels("o", 0, 0);
        let b = text_pixels("oo", 0, 0);
        assert_eq!(b.len(), 2 * a.len());
        assert!(b.iter().any(|&(x, _)| x >= 6));
    }
}
