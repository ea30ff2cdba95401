use std::fmt;

use super::{Axis, LabelTest, PatternNode, Query};

fn write_test(f: &mut fmt::Formatter<'_>, test: &LabelTest) -> fmt::Result {
    match test {
        LabelTest::Constant(c) => write!(f, "{c}"),
        LabelTest::Variable(v) => write!(f, ":{v}"),
        LabelTest::Both(c, v) => write!(f, "{c}:{v}"),
        LabelTest::Any => write!(f, "*"),
    }
}

impl fmt::Display for PatternNode {
    /// Children except the last print as predicates, the last as the tail
    /// step, which mirrors how the parser builds them.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_test(f, &self.test)?;
        if let Some((last, preds)) = self.children.split_last() {
            for p in preds {
                f.write_str("[")?;
                if p.axis == Some(Axis::Descendant) {
                    f.write_str("//")?;
                }
                write!(f, "{p}]")?;
            }
            match last.axis {
                Some(Axis::Descendant) => f.write_str("//")?,
                _ => f.write_str("/")?,
            }
            write!(f, "{last}")?;
        }
        Ok(())
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            let attrs: Vec<&str> = r.attributes.iter().map(|v| v.as_str()).collect();
            writeln!(f, "REL {}({}) FROM {};", r.name, attrs.join(","), quote(&r.source))?;
        }
        for p in &self.patterns {
            writeln!(f, "TREE {} FROM {} MATCH {};", p.name, quote(&p.source), p.root)?;
        }
        let ret: Vec<&str> = self.return_vars.iter().map(|v| v.as_str()).collect();
        writeln!(f, "RETURN {};", ret.join(","))
    }
}
