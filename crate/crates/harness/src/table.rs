//! Aligned text heat-tables for transition matrices.

const RAMP: &[u8] = b" .:-=+*#%@";

fn shade(v: f64) -> char {
    let i = (v.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64).round() as usize;
    RAMP[i] as char
}

fn block(title: &str, rows: &[Vec<f64>]) -> Vec<String> {
    let c = rows.len();
    let mut lines = vec![title.to_string()];
    let mut header = String::from("    ");
    for j in 0..c {
        header += &format!(" {j:>5} ");
    }
    lines.push(header);
    for (i, row) in rows.iter().enumerate() {
        let mut line = format!("{i:>3} ");
        for &v in row {
            line += &format!(" {v:>5.2}{}", shade(v));
        }
        lines.push(line);
    }
    lines
}

/// One matrix with a shade character after each entry (` ` for 0 up to `@`
/// for 1).
pub fn heat_table(title: &str, rows: &[Vec<f64>]) -> String {
    block(title, rows).join("\n") + "\n"
}

/// Two matrices side by side, e.g. the generating `Q` and its estimate.
pub fn heat_pair(left_title: &str, left: &[Vec<f64>], right_title: &str, right: &[Vec<f64>]) -> String {
    let a = block(left_title, left);
    let b = block(right_title, right);
    let width = a.iter().map(|l| l.chars().count()).max().unwrap_or(0) + 4;
    let n = a.len().max(b.len());
    let mut out = String::new();
    for i in 0..n {
        let l = a.get(i).map(String::as_str).unwrap_or("");
        let r = b.get(i).map(String::as_str).unwrap_or("");
        let pad = width - l.chars().count();
        out += &format!("{l}{}{r}", " ".repeat(pad));
        out = out.trim_end().to_string();
        out.push('\n');
    }
    out
}
