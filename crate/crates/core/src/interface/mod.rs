//! Virtual interfaces described in XML.
//!
//! ```xml
//! <interface name="..." width="int" height="int" start="pageId">
//!   <page id="pageId">
//!     <zone id="..." x="int" y="int" w="int" h="int" label="text"
//!           action="KEY_PRESS|...|PAGE_GOTO|NOOP" p1="int" p2="int"/>
//!   </page>
//! </interface>
//! ```
//!
//! `label`, `p1` and `p2` are optional. A `KEY_PRESS` zone without `p1`
//! types the code of its label's first character. `PAGE_GOTO` zones name
//! their target by its position in document order through `p1`.

mod click;
mod interact;
mod lookup;

pub use click::{update_click, ClickDetector, ClickEdge, ClickParams};
pub use interact::{InteractOutcome, Interaction, ZoneEvent, DOUBLE_CLICK_MS};
pub use lookup::{build_lookup, LookupTable};

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{encode_action, ActionType, Order};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterfaceError {
    #[error("line {line}: {message}")]
    Xml { line: u32, message: String },

    #[error("zone {zone:?}: {message}")]
    InvalidZone { zone: String, message: String },

    #[error("invalid interface: {0}")]
    Invalid(String),

    #[error("unknown page {0:?}")]
    UnknownPage(String),
}

/// Half-open rectangle `[x, x + w) x [y, y + h)` in interface pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ZoneRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl ZoneRect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x - self.x < self.w && y >= self.y && y - self.y < self.h
    }

    pub fn overlaps(&self, other: &ZoneRect) -> bool {
        let (ax1, ay1) = (self.x as u64 + self.w as u64, self.y as u64 + self.h as u64);
        let (bx1, by1) = (other.x as u64 + other.w as u64, other.y as u64 + other.h as u64);
        (self.x as u64) < bx1 && (other.x as u64) < ax1 && (self.y as u64) < by1 && (other.y as u64) < ay1
    }

    fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zone {
    pub id: String,
    pub rect: ZoneRect,
    pub label: String,
    pub action: ActionType,
    pub p1: i32,
    pub p2: i32,
}

impl Zone {
    pub fn order(&self) -> Order {
        encode_action(self.action, self.p1, self.p2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    pub id: String,
    pub zones: Vec<Zone>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub pages: Vec<Page>,
    pub start_page: String,
}

impl InterfaceSpec {
    pub fn dims(&self) -> (usize, usize) {
        (self.width as usize, self.height as usize)
    }

    pub fn page_index(&self, id: &str) -> Option<usize> {
        self.pages.iter().position(|p| p.id == id)
    }

    pub fn start_index(&self) -> usize {
        self.page_index(&self.start_page).unwrap_or(0)
    }

    /// Check every structural invariant. [`parse_interface`] calls this;
    /// call it again after editing a spec by hand.
    pub fn validate(&self) -> Result<(), InterfaceError> {
        if self.width == 0 || self.height == 0 {
            return Err(InterfaceError::Invalid(format!(
                "size must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if self.pages.is_empty() {
            return Err(InterfaceError::Invalid("no pages declared".into()));
        }
        let mut page_ids = HashSet::new();
        for page in &self.pages {
            if !page_ids.insert(page.id.as_str()) {
                return Err(InterfaceError::Invalid(format!("duplicate page id {:?}", page.id)));
            }
        }
        if self.page_index(&self.start_page).is_none() {
            return Err(InterfaceError::Invalid(format!(
                "start page {:?} is not declared",
                self.start_page
            )));
        }
        for page in &self.pages {
            let mut zone_ids = HashSet::new();
            for (i, zone) in page.zones.iter().enumerate() {
                let fail = |message: String| {
                    Err(InterfaceError::InvalidZone {
                        zone: zone.id.clone(),
                        message,
                    })
                };
                if !zone_ids.insert(zone.id.as_str()) {
                    return fail(format!("duplicate zone id on page {:?}", page.id));
                }
                if zone.rect.w == 0 || zone.rect.h == 0 {
                    return fail("zone must be at least 1x1".into());
                }
                if zone.rect.right() > self.width as u64 || zone.rect.bottom() > self.height as u64 {
                    return fail(format!(
                        "extends outside the {}x{} interface",
                        self.width, self.height
                    ));
                }
                if zone.action == ActionType::PageGoto
                    && usize::try_from(zone.p1).map_or(true, |p| p >= self.pages.len())
                {
                    return fail(format!(
                        "PAGE_GOTO target {} does not name one of the {} pages",
                        zone.p1,
                        self.pages.len()
                    ));
                }
                if let Some(other) = page.zones[..i].iter().find(|o| o.rect.overlaps(&zone.rect)) {
                    return fail(format!("overlaps zone {:?}", other.id));
                }
            }
        }
        Ok(())
    }

    /// Serialize back to the XML dialect accepted by [`parse_interface`].
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<interface name="{}" width="{}" height="{}" start="{}">"#,
            escape(&self.name),
            self.width,
            self.height,
            escape(&self.start_page)
        );
        for page in &self.pages {
            let _ = writeln!(out, r#"  <page id="{}">"#, escape(&page.id));
            for z in &page.zones {
                let _ = writeln!(
                    out,
                    r#"    <zone id="{}" x="{}" y="{}" w="{}" h="{}" label="{}" action="{}" p1="{}" p2="{}"/>"#,
                    escape(&z.id),
                    z.rect.x,
                    z.rect.y,
                    z.rect.w,
                    z.rect.h,
                    escape(&z.label),
                    z.action.name(),
                    z.p1,
                    z.p2
                );
            }
            out.push_str("  </page>\n");
        }
        out.push_str("</interface>\n");
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\t' => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

struct Cursor<'a, 'input> {
    doc: &'a roxmltree::Document<'input>,
}

impl<'a, 'input> Cursor<'a, 'input> {
    fn line(&self, node: roxmltree::Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn err(&self, node: roxmltree::Node, message: impl Into<String>) -> InterfaceError {
        InterfaceError::Xml {
            line: self.line(node),
            message: message.into(),
        }
    }

    fn check_attrs(&self, node: roxmltree::Node, allowed: &[&str]) -> Result<(), InterfaceError> {
        for attr in node.attributes() {
            if attr.namespace().is_some() || !allowed.contains(&attr.name()) {
                return Err(self.err(
                    node,
                    format!("unexpected attribute {:?} on <{}>", attr.name(), node.tag_name().name()),
                ));
            }
        }
        Ok(())
    }

    fn required<'n>(&self, node: roxmltree::Node<'n, 'input>, name: &str) -> Result<&'n str, InterfaceError> {
        node.attribute(name).ok_or_else(|| {
            self.err(
                node,
                format!("<{}> is missing attribute {name:?}", node.tag_name().name()),
            )
        })
    }

    fn number<T: std::str::FromStr>(
        &self,
        node: roxmltree::Node,
        name: &str,
        raw: &str,
    ) -> Result<T, InterfaceError> {
        raw.trim()
            .parse()
            .map_err(|_| self.err(node, format!("attribute {name:?} is not a valid integer: {raw:?}")))
    }

    /// Element children, rejecting stray text and unexpected elements.
    fn children<'n>(
        &self,
        node: roxmltree::Node<'n, 'input>,
        expected: &str,
    ) -> Result<Vec<roxmltree::Node<'n, 'input>>, InterfaceError> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_element() {
                if child.tag_name().name() != expected || child.tag_name().namespace().is_some() {
                    return Err(self.err(
                        child,
                        format!(
                            "unexpected element <{}> inside <{}>",
                            child.tag_name().name(),
                            node.tag_name().name()
                        ),
                    ));
                }
                out.push(child);
            } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                return Err(self.err(child, "unexpected text content"));
            }
        }
        Ok(out)
    }
}

/// Parse and validate an interface document.
pub fn parse_interface(document: &str) -> Result<InterfaceSpec, InterfaceError> {
    let doc = roxmltree::Document::parse(document).map_err(|e| InterfaceError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let c = Cursor { doc: &doc };
    let root = doc.root_element();
    if root.tag_name().name() != "interface" || root.tag_name().namespace().is_some() {
        return Err(c.err(root, format!("root element must be <interface>, found <{}>", root.tag_name().name())));
    }
    c.check_attrs(root, &["name", "width", "height", "start"])?;
    let name = c.required(root, "name")?.to_string();
    let width = c.number(root, "width", c.required(root, "width")?)?;
    let height = c.number(root, "height", c.required(root, "height")?)?;
    let start_page = c.required(root, "start")?.to_string();

    let mut pages = Vec::new();
    for page_node in c.children(root, "page")? {
        c.check_attrs(page_node, &["id"])?;
        let id = c.required(page_node, "id")?.to_string();
        let mut zones = Vec::new();
        for z in c.children(page_node, "zone")? {
            c.check_attrs(z, &["id", "x", "y", "w", "h", "label", "action", "p1", "p2"])?;
            let zone_id = c.required(z, "id")?.to_string();
            let rect = ZoneRect {
                x: c.number(z, "x", c.required(z, "x")?)?,
                y: c.number(z, "y", c.required(z, "y")?)?,
                w: c.number(z, "w", c.required(z, "w")?)?,
                h: c.number(z, "h", c.required(z, "h")?)?,
            };
            let label = z.attribute("label").unwrap_or("").to_string();
            let action = ActionType::from_name(c.required(z, "action")?).map_err(|e| {
                InterfaceError::InvalidZone {
                    zone: zone_id.clone(),
                    message: format!("line {}: {e}", c.line(z)),
                }
            })?;
            let p1 = match z.attribute("p1") {
                Some(raw) => c.number(z, "p1", raw)?,
                None if action == ActionType::KeyPress => match label.chars().next() {
                    Some(ch) => ch as i32,
                    None => {
                        return Err(InterfaceError::InvalidZone {
                            zone: zone_id,
                            message: "KEY_PRESS needs p1 or a non-empty label".into(),
                        })
                    }
                },
                None => 0,
            };
            let p2 = match z.attribute("p2") {
                Some(raw) => c.number(z, "p2", raw)?,
                None => 0,
            };
            zones.push(Zone {
                id: zone_id,
                rect,
                label,
                action,
                p1,
                p2,
            });
        }
        pages.push(Page { id, zones });
    }

    let spec = InterfaceSpec {
        name,
        width,
        height,
        pages,
        start_page,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    const MINIMAL: &str = r#"<interface name="t" width="100" height="50" start="p">
  <page id="p">
    <zone id="a" x="0" y="0" w="10" h="10" label="A" action="KEY_PRESS"/>
  </page>
</interface>"#;

    #[test]
    fn minimal_document() {
        let spec = parse_interface(MINIMAL).unwrap();
        assert_eq!(spec.pages.len(), 1);
        assert_eq!(spec.pages[0].zones.len(), 1);
        let z = &spec.pages[0].zones[0];
        assert_eq!((z.action, z.p1, z.p2), (ActionType::KeyPress, 'A' as i32, 0));
        assert_eq!(z.label, "A");
    }

    #[test]
    fn overlapping_zones_rejected() {
        let doc = r#"<interface name="t" width="100" height="50" start="p"><page id="p">
            <zone id="a" x="0" y="0" w="10" h="10" action="NOOP"/>
            <zone id="b" x="9" y="9" w="10" h="10" action="NOOP"/>
        </page></interface>"#;
        match parse_interface(doc) {
            Err(InterfaceError::InvalidZone { zone, message }) => {
                assert_eq!(zone, "b");
                assert!(message.contains("\"a\""));
            }
            other => panic!("{other:?}"),
        }
        // Touching edges do not overlap.
        let ok = doc.replace(r#"x="9" y="9""#, r#"x="10" y="0""#);
        assert!(parse_interface(&ok).is_ok());
    }

    #[test]
    fn schema_violations() {
        let cases = [
            (MINIMAL.replace("KEY_PRESS", "KEY_TAB"), "a"),
            (MINIMAL.replace(r#"w="10""#, r#"w="101""#), "a"),
            (MINIMAL.replace(r#"w="10""#, r#"w="0""#), "a"),
            (
                MINIMAL.replace(r#"action="KEY_PRESS""#, r#"action="PAGE_GOTO" p1="1""#),
                "a",
            ),
        ];
        for (doc, zone) in cases {
            match parse_interface(&doc) {
                Err(InterfaceError::InvalidZone { zone: z, .. }) => assert_eq!(z, zone),
                other => panic!("expected zone error, got {other:?}"),
            }
        }
        assert!(matches!(
            parse_interface(&MINIMAL.replace(r#"start="p""#, r#"start="q""#)),
            Err(InterfaceError::Invalid(_))
        ));
        assert!(matches!(
            parse_interface(r#"<interface name="t" width="1" height="1" start="p"/>"#),
            Err(InterfaceError::Invalid(_))
        ));
    }

    #[test]
    fn malformed_xml_reports_line() {
        let doc = "<interface name=\"t\" width=\"10\" height=\"10\" start=\"p\">\n<page id=\"p\">\n<zone id=\"a\"\n</interface>";
        match parse_interface(doc) {
            Err(InterfaceError::Xml { line, .. }) => assert!(line >= 3, "line {line}"),
            other => panic!("{other:?}"),
        }
        let doc = MINIMAL.replace(r#"h="10" label"#, r#"h="ten" label"#);
        assert_eq!(
            parse_interface(&doc).unwrap_err(),
            InterfaceError::Xml {
                line: 3,
                message: "attribute \"h\" is not a valid integer: \"ten\"".into()
            }
        );
        let doc = MINIMAL.replace("<page id=\"p\">", "<page id=\"p\" color=\"red\">");
        assert!(matches!(parse_interface(&doc), Err(InterfaceError::Xml { line: 2, .. })));
        let doc = MINIMAL.replace("</page>", "<button/></page>");
        assert!(matches!(parse_interface(&doc), Err(InterfaceError::Xml { .. })));
    }

    #[test]
    fn samples_parse() {
        let kb = parse_interface(samples::KEYBOARD_XML).unwrap();
        let letters: HashSet<i32> = kb
            .pages
            .iter()
            .flat_map(|p| &p.zones)
            .filter(|z| z.action == ActionType::KeyPress)
            .map(|z| z.p1)
            .collect();
        for c in ('a'..='z').chain('0'..='9') {
            assert!(letters.contains(&(c as i32)), "missing key {c}");
        }
        for a in [ActionType::KeySpace, ActionType::KeyBackspace, ActionType::KeyReturn, ActionType::PageGoto] {
            assert!(kb.pages.iter().flat_map(|p| &p.zones).any(|z| z.action == a));
        }
        assert!(kb.pages.len() >= 2);

        let mouse = parse_interface(samples::MOUSE_XML).unwrap();
        for a in [
            ActionType::MouseLeft,
            ActionType::MouseRight,
            ActionType::MouseDouble,
            ActionType::WheelUp,
            ActionType::WheelDown,
        ] {
            assert!(mouse.pages[0].zones.iter().any(|z| z.action == a), "{a}");
        }
    }

    #[test]
    fn serialize_round_trip_samples() {
        for doc in [samples::KEYBOARD_XML, samples::MOUSE_XML, MINIMAL] {
            let spec = parse_interface(doc).unwrap();
            assert_eq!(parse_interface(&spec.to_xml()).unwrap(), spec);
        }
    }

    #[test]
    fn escaping_survives_round_trip() {
        let doc = MINIMAL.replace(r#"label="A""#, r#"label="&lt;&amp;&quot;'&gt;" p1="60""#);
        let spec = parse_interface(&doc).unwrap();
        assert_eq!(spec.pages[0].zones[0].label, "<&\"'>");
        assert_eq!(parse_interface(&spec.to_xml()).unwrap(), spec);
    }
}
