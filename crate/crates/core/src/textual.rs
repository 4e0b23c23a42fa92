//! Binary textual/metadata features and the weighted textual score.

use serde::{Deserialize, Serialize};

use crate::corpus::{ImageRecord, Query};
use crate::text::{contains_all, contains_phrase, tokenize};

pub const TEXT_BIT_COUNT: usize = 6;

/// Names of the bits in [`TextBits::as_array`] order.
pub const TEXT_BIT_NAMES: [&str; TEXT_BIT_COUNT] = [
    "in_filename",
    "in_image_url",
    "in_alt",
    "in_surrounding",
    "in_title",
    "phrase_in_surrounding",
];

/// Whether each metadata field mentions every query term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBits {
    pub in_filename: bool,
    pub in_image_url: bool,
    pub in_alt: bool,
    pub in_surrounding: bool,
    pub in_title: bool,
    /// The terms appear contiguously and in order in the surrounding text.
    pub phrase_in_surrounding: bool,
}

impl TextBits {
    pub fn as_array(&self) -> [bool; TEXT_BIT_COUNT] {
        [
            self.in_filename,
            self.in_image_url,
            self.in_alt,
            self.in_surrounding,
            self.in_title,
            self.phrase_in_surrounding,
        ]
    }

    pub fn indicators(&self) -> [f64; TEXT_BIT_COUNT] {
        self.as_array().map(|b| if b { 1.0 } else { 0.0 })
    }
}

pub fn text_bits(record: &ImageRecord, query: &Query) -> TextBits {
    let terms = &query.terms;
    let surrounding = tokenize(&record.surrounding_text);
    TextBits {
        in_filename: contains_all(&tokenize(&record.filename), terms),
        in_image_url: contains_all(&tokenize(&record.image_url), terms),
        in_alt: contains_all(&tokenize(&record.alt_text), terms),
        in_surrounding: contains_all(&surrounding, terms),
        in_title: contains_all(&tokenize(&record.page_title), terms),
        phrase_in_surrounding: contains_phrase(&surrounding, terms),
    }
}

/// Weights that score every bit equally.
pub const DEFAULT_TEXT_WEIGHTS: [f64; TEXT_BIT_COUNT] = [1.0; TEXT_BIT_COUNT];

pub fn textual_score(bits: &TextBits, weights: &[f64; TEXT_BIT_COUNT]) -> f64 {
    bits.indicators().iter().zip(weights).map(|(b, w)| b * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record() -> ImageRecord {
        ImageRecord::new("q", "", 1, 1, 1)
    }

    #[test]
    fn filename_match() {
        let q = Query::new("penguin").unwrap();
        let mut r = record();
        r.filename = "penguin_swimming.jpg".into();
        assert!(text_bits(&r, &q).in_filename);
    }

    #[test]
    fn all_terms_required() {
        let q = Query::new("penguin animal").unwrap();
        let mut r = record();
        r.alt_text = "Emperor Penguin".into();
        assert!(!text_bits(&r, &q).in_alt);
        r.alt_text = "an Animal: emperor penguin".into();
        assert!(text_bits(&r, &q).in_alt);
    }

    #[test]
    fn empty_metadata_has_no_bits() {
        let q = Query::new("penguin").unwrap();
        assert_eq!(text_bits(&record(), &q), TextBits::default());
    }

    #[test]
    fn score_examples() {
        assert_eq!(textual_score(&TextBits::default(), &DEFAULT_TEXT_WEIGHTS), 0.0);
        let all = TextBits {
            in_filename: true,
            in_image_url: true,
            in_alt: true,
            in_surrounding: true,
            in_title: true,
            phrase_in_surrounding: true,
        };
        assert_eq!(textual_score(&all, &DEFAULT_TEXT_WEIGHTS), 6.0);
        let some = TextBits {
            in_filename: true,
            in_alt: true,
            ..TextBits::default()
        };
        assert_eq!(textual_score(&some, &[0.5; 6]), 1.0);
    }

    fn arb_bits() -> impl Strategy<Value = TextBits> {
        prop::array::uniform6(any::<bool>()).prop_map(|b| TextBits {
            in_filename: b[0],
            in_image_url: b[1],
            in_alt: b[2],
            in_surrounding: b[3] || b[5],
            in_title: b[4],
            phrase_in_surrounding: b[5],
        })
    }

    proptest! {
        #[test]
        fn phrase_implies_surrounding(words in prop::collection::vec("[a-c]{1,2}", 0..12), q in "[a-c]{1,2}( [a-c]{1,2}){0,2}") {
            let query = Query::new(&q).unwrap();
            let mut r = record();
            r.surrounding_text = words.join(" ");
            let bits = text_bits(&r, &query);
            prop_assert!(!bits.phrase_in_surrounding || bits.in_surrounding);
        }

        #[test]
        fn setting_a_bit_never_lowers_score(bits in arb_bits(), idx in 0usize..6, w in prop::array::uniform6(0.0f64..10.0)) {
            let mut arr = bits.as_array();
            let before = textual_score(&bits, &w);
            arr[idx] = true;
            let raised = TextBits {
                in_filename: arr[0], in_image_url: arr[1], in_alt: arr[2],
                in_surrounding: arr[3], in_title: arr[4], phrase_in_surrounding: arr[5],
            };
            prop_assert!(textual_score(&raised, &w) >= before);
        }

        #[test]
        fn normalized_record_has_same_bits(alt in "\\PC{0,30}", sur in "\\PC{0,30}", q in "[a-zA-Z]{1,6}") {
            let query = Query::new(&q).unwrap();
            let mut r = record();
            r.alt_text = alt;
            r.surrounding_text = sur;
            let mut n = r.clone();
            n.alt_text = crate::text::normalize(&r.alt_text);
            n.surrounding_text = crate::text::normalize(&r.surrounding_text);
            prop_assert_eq!(text_bits(&r, &query), text_bits(&n, &query));
        }

        #[test]
        fn scaling_weights_keeps_order(bits in prop::collection::vec(arb_bits(), 2..20), w in prop::array::uniform6(0.0f64..5.0), c in 0.01f64..100.0) {
            let scaled = w.map(|x| x * c);
            let order = |w: &[f64; 6]| {
                let mut idx: Vec<usize> = (0..bits.len()).collect();
                let s: Vec<f64> = bits.iter().map(|b| textual_score(b, w)).collect();
                idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
                idx
            };
            // compare through rounded scores to avoid ulp-level ties flipping
            let a = order(&w);
            let b = order(&scaled);
            let s: Vec<f64> = bits.iter().map(|b| textual_score(b, &w)).collect();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((s[*x] - s[*y]).abs() < 1e-9);
            }
        }
    }
}
