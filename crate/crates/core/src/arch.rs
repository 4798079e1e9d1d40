//! PNN architecture strings: `[784,48,35,10]+[784,50,10]`, brackets optional.

use crate::error::{PnnError, Result};

/// Parses and validates a PNN architecture string into one layer-size list per sub-network.
///
/// Every sub-network needs at least one hidden layer, all must share input and output widths,
/// and at least one must have two or more hidden layers: a PNN made only of single-hidden-layer
/// FNNs merges into one wider single-hidden-layer FNN and is rejected.
pub fn parse_arch(spec: &str) -> Result<Vec<Vec<usize>>> {
    let archs = Parser { src: spec, pos: 0 }.parse()?;
    validate_archs(&archs)?;
    Ok(archs)
}

/// Like [`parse_arch`] but without the two-hidden-layer requirement.
pub fn parse_arch_unchecked(spec: &str) -> Result<Vec<Vec<usize>>> {
    Parser { src: spec, pos: 0 }.parse()
}

pub fn validate_archs(archs: &[Vec<usize>]) -> Result<()> {
    if archs.len() < 2 {
        return Err(PnnError::InvalidArchitecture(format!(
            "a PNN needs at least 2 sub-networks joined with '+', got {}",
            archs.len()
        )));
    }
    for (i, a) in archs.iter().enumerate() {
        if a.len() < 3 {
            return Err(PnnError::InvalidArchitecture(format!(
                "sub-network {} {:?} needs at least one hidden layer",
                i + 1,
                a
            )));
        }
        if a.contains(&0) {
            return Err(PnnError::InvalidArchitecture(format!("sub-network {} {:?} has a zero-width layer", i + 1, a)));
        }
    }
    let (n0, nm) = (archs[0][0], *archs[0].last().unwrap());
    for (i, a) in archs.iter().enumerate().skip(1) {
        if a[0] != n0 {
            return Err(PnnError::InvalidArchitecture(format!(
                "input widths differ: sub-network 1 has {n0}, sub-network {} has {}",
                i + 1,
                a[0]
            )));
        }
        if *a.last().unwrap() != nm {
            return Err(PnnError::InvalidArchitecture(format!(
                "output widths differ: sub-network 1 has {nm}, sub-network {} has {}",
                i + 1,
                a.last().unwrap()
            )));
        }
    }
    if archs.iter().all(|a| a.len() == 3) {
        return Err(PnnError::InvalidArchitecture(
            "every sub-network has a single hidden layer; such a PNN is just one wider \
             single-hidden-layer FNN (merge the hidden layers), so at least one sub-network \
             needs 2 or more hidden layers"
                .into(),
        ));
    }
    Ok(())
}

pub fn format_arch(archs: &[Vec<usize>]) -> String {
    archs
        .iter()
        .map(|a| format!("[{}]", a.iter().map(usize::to_string).collect::<Vec<_>>().join(",")))
        .collect::<Vec<_>>()
        .join("+")
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> PnnError {
        PnnError::ArchSyntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Vec<Vec<usize>>> {
        let mut archs = vec![self.arch()?];
        while self.eat(b'+') {
            archs.push(self.arch()?);
        }
        self.skip_ws();
        if let Some(c) = self.peek() {
            return Err(self.err(format!("unexpected '{}'", c as char)));
        }
        Ok(archs)
    }

    fn arch(&mut self) -> Result<Vec<usize>> {
        let bracketed = self.eat(b'[');
        let mut sizes = vec![self.int()?];
        while self.eat(b',') {
            sizes.push(self.int()?);
        }
        if bracketed && !self.eat(b']') {
            return Err(self.err("expected ',' or ']'"));
        }
        Ok(sizes)
    }

    fn int(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(match self.peek() {
                Some(c) => format!("expected a layer size, found '{}'", c as char),
                None => "expected a layer size, found end of input".into(),
            }));
        }
        self.src[start..self.pos].parse().map_err(|_| PnnError::ArchSyntax {
            position: start,
            message: "layer size too large".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_bare_and_bracketed_forms() {
        let expected = vec![vec![784, 48, 35, 10], vec![784, 50, 10]];
        assert_eq!(parse_arch("784,48,35,10+784,50,10").unwrap(), expected);
        assert_eq!(parse_arch("[784,48,35,10]+[784,50,10]").unwrap(), expected);
        assert_eq!(parse_arch(" [784, 48,35 ,10] + 784,50,10 ").unwrap(), expected);
    }

    #[test]
    fn rejects_single_hidden_layer_pnns() {
        let err = parse_arch("784,50,10+784,30,10").unwrap_err();
        assert!(matches!(err, PnnError::InvalidArchitecture(ref m) if m.contains("merge")), "{err}");
        assert_eq!(parse_arch_unchecked("784,50,10+784,30,10").unwrap().len(), 2);
    }

    #[test]
    fn rejects_width_mismatch() {
        let err = parse_arch("784,48,35,10+784,50,9").unwrap_err();
        assert!(err.to_string().contains("output widths differ"), "{err}");
        assert!(parse_arch("784,48,35,10+783,50,10").is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        for (src, pos) in [("784,,10", 4), ("[784,30,10+784,20,10", 10), ("784,30,10+", 10), ("784;30", 3), ("", 0)] {
            match parse_arch(src) {
                Err(PnnError::ArchSyntax { position, .. }) => assert_eq!(position, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn structural_errors() {
        assert!(parse_arch("784,30,20,10").is_err());
        assert!(parse_arch("784,10+784,30,20,10").is_err());
        assert!(parse_arch("784,0,20,10+784,30,10").is_err());
    }

    proptest! {
        #[test]
        fn format_then_parse_round_trips(
            hidden in proptest::collection::vec(proptest::collection::vec(1usize..100, 1..4), 2..4),
            n0 in 1usize..1000,
            nm in 1usize..20,
        ) {
            let archs: Vec<Vec<usize>> = hidden
                .iter()
                .map(|h| std::iter::once(n0).chain(h.iter().copied()).chain(std::iter::once(nm)).collect())
                .collect();
            prop_assert_eq!(parse_arch_unchecked(&format_arch(&archs)).unwrap(), archs);
        }
    }
}
