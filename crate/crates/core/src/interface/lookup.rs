//! Grid lookup table resolving interface positions to zones.
//!
//! The interface is cut into square cells. A cell wholly inside one zone
//! stores that zone; a cell no zone touches stores nothing; a cell cut by
//! zone edges stores the zones that touch it, the one covering the cell
//! center first, and resolves exactly on lookup.

use std::collections::HashMap;

use super::{InterfaceError, InterfaceSpec, ZoneRect};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Empty,
    Zone(u32),
    /// `candidates[start..start + len]`.
    Mixed { start: u32, len: u32 },
}

#[derive(Clone, Debug)]
struct PageGrid {
    cells: Vec<Cell>,
    candidates: Vec<u32>,
    rects: Vec<ZoneRect>,
}

#[derive(Clone, Debug)]
pub struct LookupTable {
    cell_size: u32,
    cols: u32,
    width: u32,
    height: u32,
    pages: Vec<PageGrid>,
    page_ids: HashMap<String, usize>,
}

/// Build the per-page grids. `cell_size` below 1 is treated as 1.
pub fn build_lookup(spec: &InterfaceSpec, cell_size: u32) -> LookupTable {
    let cs = cell_size.max(1);
    let cols = spec.width.div_ceil(cs);
    let rows = spec.height.div_ceil(cs);
    let pages = spec
        .pages
        .iter()
        .map(|page| {
            let rects: Vec<ZoneRect> = page.zones.iter().map(|z| z.rect).collect();
            build_page(&rects, cs, cols, rows, spec.width, spec.height)
        })
        .collect();
    LookupTable {
        cell_size: cs,
        cols,
        width: spec.width,
        height: spec.height,
        pages,
        page_ids: spec
            .pages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect(),
    }
}

fn build_page(rects: &[ZoneRect], cs: u32, cols: u32, rows: u32, width: u32, height: u32) -> PageGrid {
    let mut touching: Vec<Vec<u32>> = vec![Vec::new(); (cols * rows) as usize];
    for (zi, r) in rects.iter().enumerate() {
        let (cx0, cx1) = (r.x / cs, (r.x + r.w - 1) / cs);
        let (cy0, cy1) = (r.y / cs, (r.y + r.h - 1) / cs);
        for cy in cy0..=cy1.min(rows - 1) {
            for cx in cx0..=cx1.min(cols - 1) {
                touching[(cy * cols + cx) as usize].push(zi as u32);
            }
        }
    }

    let mut cells = Vec::with_capacity(touching.len());
    let mut candidates = Vec::new();
    for (i, mut zones) in touching.into_iter().enumerate() {
        let (cx, cy) = (i as u32 % cols, i as u32 / cols);
        let cell = ZoneRect {
            x: cx * cs,
            y: cy * cs,
            w: cs.min(width - cx * cs),
            h: cs.min(height - cy * cs),
        };
        let covers = |r: &ZoneRect| {
            r.x <= cell.x
                && r.y <= cell.y
                && r.x as u64 + r.w as u64 >= cell.x as u64 + cell.w as u64
                && r.y as u64 + r.h as u64 >= cell.y as u64 + cell.h as u64
        };
        cells.push(match zones.as_slice() {
            [] => Cell::Empty,
            [z] if covers(&rects[*z as usize]) => Cell::Zone(*z),
            _ => {
                let (mx, my) = (cell.x + cell.w / 2, cell.y + cell.h / 2);
                if let Some(pos) = zones.iter().position(|&z| rects[z as usize].contains(mx, my)) {
                    zones.swap(0, pos);
                }
                let start = candidates.len() as u32;
                candidates.extend_from_slice(&zones);
                Cell::Mixed {
                    start,
                    len: zones.len() as u32,
                }
            }
        });
    }
    PageGrid {
        cells,
        candidates,
        rects: rects.to_vec(),
    }
}

impl LookupTable {
    pub fn cell_size(&self) -> u32 {
        self.cell_size
    }

    pub fn page_index(&self, page: &str) -> Result<usize, InterfaceError> {
        self.page_ids
            .get(page)
            .copied()
            .ok_or_else(|| InterfaceError::UnknownPage(page.to_string()))
    }

    /// Zone index on `page` containing `pos`, if any. Positions are floored
    /// to integer pixels; anything outside the interface hits nothing.
    pub fn hit_test(&self, page: &str, pos: (f64, f64)) -> Result<Option<usize>, InterfaceError> {
        let idx = self.page_index(page)?;
        Ok(self.hit_test_index(idx, pos))
    }

    pub fn hit_test_index(&self, page: usize, pos: (f64, f64)) -> Option<usize> {
        let (x, y) = (pos.0.floor(), pos.1.floor());
        if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
            return None;
        }
        self.hit_test_px(page, x as u32, y as u32)
    }

    pub fn hit_test_px(&self, page: usize, x: u32, y: u32) -> Option<usize> {
        let grid = self.pages.get(page)?;
        if x >= self.width || y >= self.height {
            return None;
        }
        let cell = (y / self.cell_size) * self.cols + x / self.cell_size;
        match grid.cells[cell as usize] {
            Cell::Empty => None,
            Cell::Zone(z) => Some(z as usize),
            Cell::Mixed { start, len } => grid.candidates[start as usize..(start + len) as usize]
                .iter()
                .copied()
                .find(|&z| grid.rects[z as usize].contains(x, y))
                .map(|z| z as usize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ActionType;
    use crate::interface::{Page, Zone};

    fn spec(zones: &[(u32, u32, u32, u32)]) -> InterfaceSpec {
        InterfaceSpec {
            name: "t".into(),
            width: 40,
            height: 30,
            start_page: "p".into(),
            pages: vec![Page {
                id: "p".into(),
                zones: zones
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y, w, h))| Zone {
                        id: format!("z{i}"),
                        rect: ZoneRect { x, y, w, h },
                        label: String::new(),
                        action: ActionType::Noop,
                        p1: 0,
                        p2: 0,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn empty_page_hits_nothing() {
        let t = build_lookup(&spec(&[]), 4);
        for y in 0..30 {
            for x in 0..40 {
                assert_eq!(t.hit_test_px(0, x, y), None);
            }
        }
    }

    #[test]
    fn full_cover_zone() {
        let t = build_lookup(&spec(&[(0, 0, 40, 30)]), 7);
        assert!(t.pages[0].cells.iter().all(|c| *c == Cell::Zone(0)));
        assert_eq!(t.hit_test("p", (39.9, 29.9)).unwrap(), Some(0));
    }

    #[test]
    fn half_open_boundaries() {
        let s = spec(&[(5, 5, 10, 10), (15, 5, 3, 3)]);
        let t = build_lookup(&s, 4);
        assert_eq!(t.hit_test("p", (10.0, 10.0)).unwrap(), Some(0));
        assert_eq!(t.hit_test("p", (4.99, 10.0)).unwrap(), None);
        assert_eq!(t.hit_test("p", (14.99, 5.0)).unwrap(), Some(0));
        // x = 15 is outside zone 0 and the first column of zone 1.
        assert_eq!(t.hit_test("p", (15.0, 5.0)).unwrap(), Some(1));
        assert_eq!(t.hit_test("p", (15.0, 8.0)).unwrap(), None);
        assert_eq!(t.hit_test("p", (10.0, 15.0)).unwrap(), None);
        assert_eq!(t.hit_test("p", (-0.5, 0.0)).unwrap(), None);
    }

    #[test]
    fn unknown_page_is_an_error() {
        let t = build_lookup(&spec(&[]), 4);
        assert_eq!(
            t.hit_test("nope", (0.0, 0.0)),
            Err(InterfaceError::UnknownPage("nope".into()))
        );
    }

    #[test]
    fn mixed_cells_put_center_zone_first() {
        // Cell (0,0) of size 8 has center (4,4), inside zone 1.
        let t = build_lookup(&spec(&[(0, 0, 3, 8), (3, 0, 5, 8)]), 8);
        match t.pages[0].cells[0] {
            Cell::Mixed { start, len } => {
                assert_eq!(len, 2);
                assert_eq!(t.pages[0].candidates[start as usize], 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
