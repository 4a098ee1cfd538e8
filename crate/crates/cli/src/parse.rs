//! Flag value parsers.

/// `N` for a square, or `WxH`.
pub fn size(s: &str) -> Result<(usize, usize), String> {
    let dims: Vec<&str> = s.split(['x', 'X']).collect();
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{s:?} is not a positive size; use N or WxH"))
    };
    match dims.as_slice() {
        [n] => num(n).map(|n| (n, n)),
        [w, h] => Ok((num(w)?, num(h)?)),
        _ => Err(format!("{s:?} is not a size; use N or WxH")),
    }
}

/// `dx,dy`, either may be negative.
pub fn offset(s: &str) -> Result<(i64, i64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [dx, dy] = parts.as_slice() else {
        return Err(format!("{s:?} is not an offset; use dx,dy"));
    };
    let num = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("{v:?} in offset {s:?}: {e}"));
    Ok((num(dx)?, num(dy)?))
}

/// A probability-like value in [0, 1].
pub fn unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}
