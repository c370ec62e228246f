//! Surface-form normalization shared by the store, generator and validator.

use unicode_normalization::UnicodeNormalization;

/// NFC normalization.
pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// NFC normalization followed by a full lowercase fold.
pub fn fold(s: &str) -> String {
    nfc(&s.nfc().collect::<String>().to_lowercase())
}

pub fn is_vowel(c: char) -> bool {
    matches!(
        c,
        'a' | 'e' | 'i' | 'o' | 'u' | 'á' | 'é' | 'í' | 'ó' | 'ú' | 'ü' | 'A' | 'E' | 'I' | 'O' | 'U'
    )
}

/// Replaces acute-accented vowels with their plain counterparts.
pub fn strip_acute(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'á' => 'a',
            'é' => 'e',
            'í' => 'i',
            'ó' => 'o',
            'ú' => 'u',
            other => other,
        })
        .collect()
}

pub fn has_acute(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'á' | 'é' | 'í' | 'ó' | 'ú'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nfd_and_nfc_fold_alike() {
        let nfd = "comunicacio\u{301}n";
        let nfc_form = "comunicación";
        assert_ne!(nfd, nfc_form);
        assert_eq!(fold(nfd), fold(nfc_form));
        assert_eq!(fold("Compra"), "compra");
    }
}
