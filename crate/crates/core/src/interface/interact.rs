//! Turning cursor position and click edges into zone events, page changes
//! and orders.

use super::{ClickEdge, InterfaceError, InterfaceSpec, LookupTable};
use crate::engine::{encode_action, ActionType, Order};

/// Two left clicks on the same zone closer than this become a double click.
pub const DOUBLE_CLICK_MS: u64 = 600;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ZoneEvent {
    Enter { page: String, zone: String },
    Leave { page: String, zone: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractOutcome {
    pub events: Vec<ZoneEvent>,
    pub order: Option<Order>,
    /// Set when this step switched pages.
    pub new_page: Option<String>,
}

/// Per-session interaction state: current page, hovered zone and the last
/// left click for double-click synthesis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    page: usize,
    hovered: Option<usize>,
    last_left: Option<(usize, usize, u64)>,
}

impl Interaction {
    pub fn new(spec: &InterfaceSpec) -> Self {
        Self {
            page: spec.start_index(),
            hovered: None,
            last_left: None,
        }
    }

    pub fn page(&self) -> usize {
        self.page
    }

    pub fn page_id<'s>(&self, spec: &'s InterfaceSpec) -> &'s str {
        &spec.pages[self.page].id
    }

    pub fn hovered(&self) -> Option<usize> {
        self.hovered
    }

    /// Jump to a page by id (operator command).
    pub fn goto_page(&mut self, spec: &InterfaceSpec, id: &str) -> Result<Vec<ZoneEvent>, InterfaceError> {
        let target = spec
            .page_index(id)
            .ok_or_else(|| InterfaceError::UnknownPage(id.to_string()))?;
        Ok(self.switch(spec, target))
    }

    fn switch(&mut self, spec: &InterfaceSpec, target: usize) -> Vec<ZoneEvent> {
        let mut events = Vec::new();
        if let Some(z) = self.hovered.take() {
            events.push(ZoneEvent::Leave {
                page: spec.pages[self.page].id.clone(),
                zone: spec.pages[self.page].zones[z].id.clone(),
            });
        }
        self.page = target;
        self.last_left = None;
        events
    }

    /// Process one frame. `cursor` is in interface coordinates; `t_ms` is the
    /// frame timestamp used for double-click timing.
    pub fn interact(
        &mut self,
        spec: &InterfaceSpec,
        table: &LookupTable,
        cursor: (f64, f64),
        edge: ClickEdge,
        t_ms: u64,
    ) -> InteractOutcome {
        let mut out = InteractOutcome::default();
        let page = &spec.pages[self.page];
        let hit = table.hit_test_index(self.page, cursor);
        if hit != self.hovered {
            if let Some(z) = self.hovered {
                out.events.push(ZoneEvent::Leave {
                    page: page.id.clone(),
                    zone: page.zones[z].id.clone(),
                });
            }
            if let Some(z) = hit {
                out.events.push(ZoneEvent::Enter {
                    page: page.id.clone(),
                    zone: page.zones[z].id.clone(),
                });
            }
            self.hovered = hit;
        }

        if edge != ClickEdge::Down {
            return out;
        }
        let Some(zi) = hit else {
            return out;
        };
        let zone = &page.zones[zi];
        match zone.action {
            ActionType::PageGoto => {
                // Validated: p1 indexes a page.
                let target = zone.p1 as usize;
                out.events.extend(self.switch(spec, target));
                out.new_page = Some(spec.pages[target].id.clone());
                // The cursor now hovers whatever lies under it on the new page.
                let hit = table.hit_test_index(self.page, cursor);
                if let Some(z) = hit {
                    out.events.push(ZoneEvent::Enter {
                        page: spec.pages[target].id.clone(),
                        zone: spec.pages[target].zones[z].id.clone(),
                    });
                }
                self.hovered = hit;
            }
            ActionType::MouseLeft => {
                let key = (self.page, zi);
                let double = self
                    .last_left
                    .is_some_and(|(p, z, t)| (p, z) == key && t_ms.saturating_sub(t) < DOUBLE_CLICK_MS);
                if double {
                    self.last_left = None;
                    out.order = Some(encode_action(ActionType::MouseDouble, zone.p1, zone.p2));
                } else {
                    self.last_left = Some((key.0, key.1, t_ms));
                    out.order = Some(zone.order());
                }
            }
            _ => out.order = Some(zone.order()),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::{build_lookup, parse_interface};
    use crate::samples;

    fn keyboard() -> (InterfaceSpec, LookupTable) {
        let spec = parse_interface(samples::KEYBOARD_XML).unwrap();
        let table = build_lookup(&spec, 4);
        (spec, table)
    }

    fn center_of(spec: &InterfaceSpec, page: &str, zone: &str) -> (f64, f64) {
        let p = &spec.pages[spec.page_index(page).unwrap()];
        let r = p.zones.iter().find(|z| z.id == zone).unwrap().rect;
        (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0)
    }

    #[test]
    fn down_over_key_emits_order() {
        let (spec, table) = keyboard();
        let mut it = Interaction::new(&spec);
        let pos = center_of(&spec, "letters_am", "key_f");
        let out = it.interact(&spec, &table, pos, ClickEdge::Down, 0);
        assert_eq!(out.order.unwrap().triple(), [1, 102, 0]);
        assert_eq!(
            out.events,
            [ZoneEvent::Enter {
                page: "letters_am".into(),
                zone: "key_f".into()
            }]
        );
    }

    #[test]
    fn down_over_gap_emits_nothing() {
        let (spec, table) = keyboard();
        let mut it = Interaction::new(&spec);
        // Left margin of the interface is a gap.
        let out = it.interact(&spec, &table, (2.0, 150.0), ClickEdge::Down, 0);
        assert_eq!(out, InteractOutcome::default());
    }

    #[test]
    fn page_goto_switches_without_order() {
        let (spec, table) = keyboard();
        let mut it = Interaction::new(&spec);
        let pos = center_of(&spec, "letters_am", "goto_nz");
        it.interact(&spec, &table, pos, ClickEdge::None, 0);
        let out = it.interact(&spec, &table, pos, ClickEdge::Down, 33);
        assert_eq!(out.order, None);
        assert_eq!(out.new_page.as_deref(), Some("letters_nz"));
        assert_eq!(it.page_id(&spec), "letters_nz");
        assert_eq!(
            out.events[0],
            ZoneEvent::Leave {
                page: "letters_am".into(),
                zone: "goto_nz".into()
            }
        );
        // The same tab exists on the new page, so it is hovered again.
        assert_eq!(
            out.events[1],
            ZoneEvent::Enter {
                page: "letters_nz".into(),
                zone: "goto_nz".into()
            }
        );
    }

    #[test]
    fn hover_events_on_crossing() {
        let (spec, table) = keyboard();
        let mut it = Interaction::new(&spec);
        let a = center_of(&spec, "letters_am", "key_a");
        let b = center_of(&spec, "letters_am", "key_b");
        assert_eq!(it.interact(&spec, &table, a, ClickEdge::None, 0).events.len(), 1);
        assert!(it.interact(&spec, &table, a, ClickEdge::None, 0).events.is_empty());
        let ev = it.interact(&spec, &table, b, ClickEdge::None, 0).events;
        assert!(matches!(&ev[..], [ZoneEvent::Leave { zone: l, .. }, ZoneEvent::Enter { zone: e, .. }] if l == "key_a" && e == "key_b"));
    }

    #[test]
    fn double_click_synthesis() {
        let spec = parse_interface(samples::MOUSE_XML).unwrap();
        let table = build_lookup(&spec, 4);
        let left = center_of(&spec, "pad", "left");
        let mut it = Interaction::new(&spec);
        let first = it.interact(&spec, &table, left, ClickEdge::Down, 1000).order.unwrap();
        let second = it.interact(&spec, &table, left, ClickEdge::Down, 1400).order.unwrap();
        let third = it.interact(&spec, &table, left, ClickEdge::Down, 2500).order.unwrap();
        assert_eq!(first.action, ActionType::MouseLeft);
        assert_eq!(second.action, ActionType::MouseDouble);
        assert_eq!(third.action, ActionType::MouseLeft);
    }

    #[test]
    fn goto_page_command() {
        let (spec, _) = keyboard();
        let mut it = Interaction::new(&spec);
        it.goto_page(&spec, "digits").unwrap();
        assert_eq!(it.page_id(&spec), "digits");
        assert!(it.goto_page(&spec, "emoji").is_err());
    }
}
