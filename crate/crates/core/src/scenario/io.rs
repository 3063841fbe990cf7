//! Plain-text dump of a drop, used for fixtures.
//!
//! ```text
//! # jcam-state v1
//! # d_min_m
//! 5e0
//! # nodes
//! kind,index,x_m,y_m
//! ap,0,1.2e2,3.4e2
//! ...
//! # beta_dl 8 4
//! <8 comma-separated rows of 4 values>
//! ```
//!
//! Matrix blocks follow in the order beta_dl, beta_jam, beta_obs, beta_ap,
//! beta_pair (1 x U), beta_utx_user, gamma_dl, gamma_jam, gamma_obs. Values
//! are written in shortest round-trip form.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{LargeScaleState, Layout, Point};
use crate::error::{Error, Result};

const MAGIC: &str = "# jcam-state v1";
const NODE_HEADER: &str = "kind,index,x_m,y_m";

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "# {name} {} {}", m.nrows(), m.ncols());
    if m.ncols() == 0 {
        return;
    }
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
}

pub fn write_state(layout: &Layout, ls: &LargeScaleState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "# d_min_m\n{:e}", layout.d_min_m);
    let _ = writeln!(out, "# nodes\n{NODE_HEADER}");
    let groups: [(&str, &Vec<Point>); 4] = [
        ("ap", &layout.aps),
        ("user", &layout.users),
        ("utx", &layout.untrusted_tx),
        ("urx", &layout.untrusted_rx),
    ];
    for (kind, pts) in groups {
        for (i, p) in pts.iter().enumerate() {
            let _ = writeln!(out, "{kind},{i},{:e},{:e}", p.x, p.y);
        }
    }
    let pair = DMatrix::from_row_slice(1, ls.beta_pair.len(), &ls.beta_pair);
    for (name, m) in [
        ("beta_dl", &ls.beta_dl),
        ("beta_jam", &ls.beta_jam),
        ("beta_obs", &ls.beta_obs),
        ("beta_ap", &ls.beta_ap),
        ("beta_pair", &pair),
        ("beta_utx_user", &ls.beta_utx_user),
        ("gamma_dl", &ls.gamma_dl),
        ("gamma_jam", &ls.gamma_jam),
        ("gamma_obs", &ls.gamma_obs),
    ] {
        write_matrix(&mut out, name, m);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.inner.next() {
                None => return Err(Error::State("unexpected end of input".into())),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => return Ok((i + 1, l.trim())),
            }
        }
    }

    fn peek_is_header(&mut self) -> bool {
        while let Some((_, l)) = self.inner.peek() {
            if l.trim().is_empty() {
                self.inner.next();
                continue;
            }
            return l.trim_start().starts_with('#');
        }
        true
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let (n, l) = self.next()?;
        if l != want {
            return Err(Error::State(format!("line {n}: expected `{want}`, got `{l}`")));
        }
        Ok(())
    }
}

fn num(line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::State(format!("line {line}: bad number `{s}`")))
}

fn read_matrix(lines: &mut Lines<'_>, name: &str) -> Result<DMatrix<f64>> {
    let (n, header) = lines.next()?;
    let parts: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
    if parts.len() != 3 || parts[0] != name {
        return Err(Error::State(format!("line {n}: expected `# {name} <rows> <cols>`")));
    }
    let dims = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::State(format!("line {n}: bad dimension `{s}`")))
    };
    let (rows, cols) = (dims(parts[1])?, dims(parts[2])?);
    let mut m = DMatrix::zeros(rows, cols);
    if cols == 0 {
        return Ok(m);
    }
    for r in 0..rows {
        let (ln, l) = lines.next()?;
        let vals: Vec<&str> = l.split(',').collect();
        if vals.len() != cols {
            return Err(Error::State(format!(
                "line {ln}: expected {cols} values, got {}",
                vals.len()
            )));
        }
        for (c, v) in vals.iter().enumerate() {
            m[(r, c)] = num(ln, v)?;
        }
    }
    Ok(m)
}

/// Parses the output of [`write_state`].
pub fn read_state(text: &str) -> Result<(Layout, LargeScaleState)> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
    };
    lines.expect(MAGIC)?;
    lines.expect("# d_min_m")?;
    let (n, l) = lines.next()?;
    let d_min_m = num(n, l)?;
    lines.expect("# nodes")?;
    lines.expect(NODE_HEADER)?;
    let mut layout = Layout {
        aps: vec![],
        users: vec![],
        untrusted_tx: vec![],
        untrusted_rx: vec![],
        d_min_m,
    };
    while !lines.peek_is_header() {
        let (n, l) = lines.next()?;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 4 {
            return Err(Error::State(format!("line {n}: expected 4 fields")));
        }
        let p = Point::new(num(n, f[2])?, num(n, f[3])?);
        let list = match f[0] {
            "ap" => &mut layout.aps,
            "user" => &mut layout.users,
            "utx" => &mut layout.untrusted_tx,
            "urx" => &mut layout.untrusted_rx,
            other => return Err(Error::State(format!("line {n}: unknown node kind `{other}`"))),
        };
        if f[1].trim().parse::<usize>().ok() != Some(list.len()) {
            return Err(Error::State(format!("line {n}: node index out of order")));
        }
        list.push(p);
    }
    let beta_dl = read_matrix(&mut lines, "beta_dl")?;
    let beta_jam = read_matrix(&mut lines, "beta_jam")?;
    let beta_obs = read_matrix(&mut lines, "beta_obs")?;
    let beta_ap = read_matrix(&mut lines, "beta_ap")?;
    let beta_pair = read_matrix(&mut lines, "beta_pair")?.iter().copied().collect();
    let beta_utx_user = read_matrix(&mut lines, "beta_utx_user")?;
    let gamma_dl = read_matrix(&mut lines, "gamma_dl")?;
    let gamma_jam = read_matrix(&mut lines, "gamma_jam")?;
    let gamma_obs = read_matrix(&mut lines, "gamma_obs")?;
    let ls = LargeScaleState {
        beta_dl,
        beta_jam,
        beta_obs,
        beta_ap,
        beta_pair,
        beta_utx_user,
        gamma_dl,
        gamma_jam,
        gamma_obs,
    };
    let (m, k, u) = (layout.aps.len(), layout.users.len(), layout.untrusted_tx.len());
    let shapes_ok = ls.beta_dl.shape() == (m, k)
        && ls.beta_jam.shape() == (m, u)
        && ls.beta_obs.shape() == (m, u)
        && ls.beta_ap.shape() == (m, m)
        && ls.beta_pair.len() == u
        && ls.beta_utx_user.shape() == (u, k)
        && ls.gamma_dl.shape() == (m, k)
        && ls.gamma_jam.shape() == (m, u)
        && ls.gamma_obs.shape() == (m, u)
        && layout.untrusted_rx.len() == u;
    if !shapes_ok {
        return Err(Error::State("matrix shapes disagree with the node table".into()));
    }
    Ok((layout, ls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::scenario::make_drop;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn state_round_trips(seed in any::<u64>(), m in 1usize..6, k in 0usize..4, u in 1usize..3) {
            let cfg = SystemConfig::new(m, 4, k, u);
            let (layout, ls) = make_drop(&cfg, seed).unwrap();
            let text = write_state(&layout, &ls);
            let (l2, s2) = read_state(&text).unwrap();
            prop_assert_eq!(&layout, &l2);
            prop_assert_eq!(&ls, &s2);
            prop_assert_eq!(write_state(&l2, &s2), text);
        }
    }

    #[test]
    fn rejects_truncated_input() {
        let cfg = SystemConfig::new(3, 4, 2, 1);
        let (layout, ls) = make_drop(&cfg, 5).unwrap();
        let text = write_state(&layout, &ls);
        let cut = &text[..text.len() / 2];
        assert!(read_state(cut).is_err());
        assert!(read_state("hello").is_err());
    }
}
