use std::path::Path;

use super::{IngestError, LabeledTree, Relation, Value};

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_owned(), source })
}

/// Reads a CSV file whose first row names the attributes. The relation is
/// named after the file stem.
pub fn load_relation_csv(path: &Path) -> Result<Relation, IngestError> {
    let text = read(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_relation_csv(&name, &text, path)
}

/// Parses CSV text; `origin` only labels errors.
pub fn parse_relation_csv(name: &str, text: &str, origin: &Path) -> Result<Relation, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let malformed = |e: csv::Error| IngestError::MalformedDocument { path: origin.to_owned(), msg: e.to_string() };
    let header = match records.next() {
        Some(r) => r.map_err(malformed)?,
        None => return Err(IngestError::EmptyHeader(origin.to_owned())),
    };
    let attributes: Vec<String> = header.iter().map(|h| h.trim().to_owned()).collect();
    if attributes.is_empty() || attributes.iter().all(String::is_empty) {
        return Err(IngestError::EmptyHeader(origin.to_owned()));
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(malformed)?;
        // A completely blank line is not a row.
        if rec.len() == 1 && rec[0].is_empty() && attributes.len() > 1 {
            continue;
        }
        if rec.len() != attributes.len() {
            return Err(IngestError::RaggedRow {
                path: origin.to_owned(),
                row: i + 2,
                expected: attributes.len(),
                got: rec.len(),
            });
        }
        rows.push(rec.iter().map(Value::from).collect());
    }
    Ok(Relation::new(name, attributes, rows))
}

pub fn load_tree_xml(path: &Path) -> Result<LabeledTree, IngestError> {
    parse_tree_xml(&read(path)?, path)
}

/// Elements become nodes labeled by tag. An attribute `n="v"` becomes a
/// child `@n` with a single child `v`, placed before the element's content.
/// Text that is not blank after trimming becomes a child labeled by it.
pub fn parse_tree_xml(text: &str, origin: &Path) -> Result<LabeledTree, IngestError> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| IngestError::MalformedDocument { path: origin.to_owned(), msg: e.to_string() })?;
    Ok(xml_element(doc.root_element()))
}

fn xml_element(node: roxmltree::Node<'_, '_>) -> LabeledTree {
    let mut children = Vec::new();
    for a in node.attributes() {
        children.push(LabeledTree::node(format!("@{}", a.name()), vec![LabeledTree::leaf(a.value())]));
    }
    for c in node.children() {
        if c.is_element() {
            children.push(xml_element(c));
        } else if c.is_text() {
            let t = c.text().unwrap_or("").trim();
            if !t.is_empty() {
                children.push(LabeledTree::leaf(t));
            }
        }
    }
    LabeledTree::node(node.tag_name().name(), children)
}

pub fn load_tree_json(path: &Path) -> Result<LabeledTree, IngestError> {
    parse_tree_json(&read(path)?, path)
}

/// The document root is labeled `$`. An object member becomes a child
/// labeled by its key, holding the encoding of the member value; array
/// elements are attached to the enclosing node in order. Numbers keep their
/// source text.
pub fn parse_tree_json(text: &str, origin: &Path) -> Result<LabeledTree, IngestError> {
    let v: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| IngestError::MalformedDocument { path: origin.to_owned(), msg: e.to_string() })?;
    let mut root = LabeledTree::leaf("$");
    json_into(&v, &mut root.children);
    Ok(root)
}

fn json_into(v: &serde_json::Value, out: &mut Vec<LabeledTree>) {
    use serde_json::Value as J;
    match v {
        J::Object(map) => {
            for (k, member) in map {
                let mut child = LabeledTree::leaf(k.as_str());
                json_into(member, &mut child.children);
                out.push(child);
            }
        }
        J::Array(items) => items.iter().for_each(|item| json_into(item, out)),
        J::String(s) => out.push(LabeledTree::leaf(s.as_str())),
        // With arbitrary precision enabled, numbers print as written.
        J::Number(n) => out.push(LabeledTree::leaf(n.to_string())),
        J::Bool(b) => out.push(LabeledTree::leaf(b.to_string())),
        J::Null => out.push(LabeledTree::leaf("null")),
    }
}

/// Writes a relation as CSV with a header row.
pub fn write_relation_csv(r: &Relation) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&r.attributes).expect("write to memory");
    for row in &r.rows {
        w.write_record(row.iter().map(Value::as_str)).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 values")
}

/// Writes a tree as nested XML elements, one element per node. Every label
/// must be a valid XML element name; the document reads back as the same
/// tree.
pub fn write_tree_xml(t: &LabeledTree) -> String {
    fn is_name(s: &str) -> bool {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
            && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
    }
    fn walk(t: &LabeledTree, depth: usize, out: &mut String) {
        assert!(is_name(t.label.as_str()), "label `{}` is not an XML name", t.label);
        out.push_str(&"  ".repeat(depth));
        if t.children.is_empty() {
            out.push_str(&format!("<{}/>\n", t.label));
            return;
        }
        out.push_str(&format!("<{}>\n", t.label));
        for c in &t.children {
            walk(c, depth + 1, out);
        }
        out.push_str(&"  ".repeat(depth));
        out.push_str(&format!("</{}>\n", t.label));
    }
    let mut out = String::new();
    walk(t, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn here() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn csv_rows_are_a_set() {
        let r = parse_relation_csv("R1", "b,c\nb0,c0\nb0,c1\nb1,c0\nb1,c1\nb0,c0\n", here()).unwrap();
        assert_eq!(r.attributes, vec!["b", "c"]);
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn csv_quoting() {
        let r = parse_relation_csv("R", "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n", here()).unwrap();
        assert_eq!(r.rows, vec![vec![Value::from("x,y"), Value::from("say \"hi\"")]]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_relation_csv("R", "a,b\n1,2,3\n", here()),
            Err(IngestError::RaggedRow { expected: 2, got: 3, .. })
        ));
        assert!(matches!(parse_relation_csv("R", "", here()), Err(IngestError::EmptyHeader(_))));
    }

    #[test]
    fn xml_mapping() {
        let t = parse_tree_xml("<a><b/><c/></a>", here()).unwrap();
        assert_eq!(t, LabeledTree::node("a", vec![LabeledTree::leaf("b"), LabeledTree::leaf("c")]));
        let t = parse_tree_xml("<item id=\"7\">x</item>", here()).unwrap();
        assert_eq!(
            t,
            LabeledTree::node(
                "item",
                vec![LabeledTree::node("@id", vec![LabeledTree::leaf("7")]), LabeledTree::leaf("x")]
            )
        );
        assert_eq!(t.node_count(), 4);
        assert_eq!(parse_tree_xml("<a>   </a>", here()).unwrap(), LabeledTree::leaf("a"));
        assert!(matches!(parse_tree_xml("<a><b></a>", here()), Err(IngestError::MalformedDocument { .. })));
    }

    #[test]
    fn writers_round_trip() {
        let t = LabeledTree::node("a", vec![LabeledTree::node("b", vec![LabeledTree::leaf("b0")]), LabeledTree::leaf("c")]);
        assert_eq!(parse_tree_xml(&write_tree_xml(&t), here()).unwrap(), t);
        let r = parse_relation_csv("R", "x,y\n1,\"a,b\"\n2,c\n", here()).unwrap();
        assert_eq!(parse_relation_csv("R", &write_relation_csv(&r), here()).unwrap(), r);
    }

    #[test]
    fn json_mapping() {
        let t = parse_tree_json(r#"{"flag":"abnormal"}"#, here()).unwrap();
        assert_eq!(t, LabeledTree::node("$", vec![LabeledTree::node("flag", vec![LabeledTree::leaf("abnormal")])]));
        let t = parse_tree_json(r#"{"a":[1,2.50]}"#, here()).unwrap();
        assert_eq!(
            t,
            LabeledTree::node("$", vec![LabeledTree::node("a", vec![LabeledTree::leaf("1"), LabeledTree::leaf("2.50")])])
        );
        assert_eq!(parse_tree_json("{}", here()).unwrap(), LabeledTree::leaf("$"));
        let t = parse_tree_json(r#"{"t":true,"n":null}"#, here()).unwrap();
        assert_eq!(t.children[0].children[0].label.as_str(), "true");
        assert_eq!(t.children[1].children[0].label.as_str(), "null");
    }
}
