//! Thousands separators for screen-reader friendly numbers.

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn group(digits: &str) -> String {
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Inserts commas into integer tokens of 1000 or more.
///
/// A token is left alone when it is a four-digit year in 1500..=2100, has a
/// leading zero, touches a letter or underscore, follows `.`, `#`, or `,`, or
/// is followed by `,` and another digit (already grouped or a list).
pub fn format_numbers(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let token: String = chars[start..i].iter().collect();
        let before = start.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i).copied();
        let after2 = chars.get(i + 1).copied();
        let exempt = token.len() < 4
            || token.starts_with('0')
            || (token.len() == 4 && (1500..=2100).contains(&token.parse::<u32>().unwrap_or(0)))
            || before.is_some_and(|c| is_word_char(c) || matches!(c, '.' | '#' | ','))
            || after.is_some_and(is_word_char)
            || (after == Some(',') && after2.is_some_and(|c| c.is_ascii_digit()));
        if exempt {
            out.push_str(&token);
        } else {
            out.push_str(&group(&token));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Digit grouping written independently: split from the right by threes.
    fn grouped(n: u64) -> String {
        let s = n.to_string();
        let mut parts = Vec::new();
        let mut end = s.len();
        while end > 3 {
            parts.push(&s[end - 3..end]);
            end -= 3;
        }
        parts.push(&s[..end]);
        parts.reverse();
        parts.join(",")
    }

    #[test]
    fn groups_large_integers() {
        assert_eq!(format_numbers("468297"), "468,297");
        assert_eq!(format_numbers("1400000 and 1600000"), "1,400,000 and 1,600,000");
        assert_eq!(format_numbers("999 and 1000"), "999 and 1,000");
        assert_eq!(format_numbers("-25000.75 homes"), "-25,000.75 homes");
    }

    #[test]
    fn exemptions_hold() {
        for s in ["in 2020", "from 1850 to 2021", "node 1.2.6", "#12345", "id_12345", "A1234", "1234px", "007123", "3.14159", "12,345"] {
            assert_eq!(format_numbers(s), s);
        }
        assert_eq!(format_numbers("in 2150"), "in 2,150");
    }

    #[test]
    fn matches_grouping_oracle() {
        for n in [1000u64, 9999, 10000, 123456, 1234567, 98765432101] {
            let s = n.to_string();
            let is_year = s.len() == 4 && (1500..=2100).contains(&n);
            let want = if is_year { s.clone() } else { grouped(n) };
            assert_eq!(format_numbers(&format!("total {s} units")), format!("total {want} units"));
        }
    }

    #[test]
    fn idempotent_on_random_strings() {
        use rand::{Rng, SeedableRng};
        let alphabet: Vec<char> = "0123456789012345678901234567890123456789 ,.#_-aZ%".chars().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let len = rng.gen_range(0..40);
            let s: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            let once = format_numbers(&s);
            assert_eq!(format_numbers(&once), once, "{s:?}");
        }
    }

    proptest! {
        #[test]
        fn idempotent(s in "[0-9 ,.#_a-z%-]{0,40}") {
            let once = format_numbers(&s);
            prop_assert_eq!(format_numbers(&once), once);
        }

        #[test]
        fn only_commas_are_added(s in "[0-9 ,.#_a-z%-]{0,40}") {
            let out = format_numbers(&s);
            prop_assert_eq!(out.replace(',', ""), s.replace(',', ""));
        }
    }
}
