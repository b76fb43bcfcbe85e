//! TTP benchmark instances: the text format of the standard benchmark suite,
//! CEIL_2D distances and the derived speed constant.
//!
//! Cities and items are 0-based in memory. City 0 is the depot the thief
//! starts from; files use 1-based indices throughout.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    coords: Vec<(f64, f64)>,
    profits: Vec<f64>,
    nominal_weights: Vec<f64>,
    item_city: Vec<usize>,
    capacity: f64,
    v_min: f64,
    v_max: f64,
    renting_rate: f64,
    items_at: Vec<Vec<usize>>,
}

/// One item as given to [`Instance::new`]; `city` is 0-based and must not be the depot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemSpec {
    pub profit: f64,
    pub weight: f64,
    pub city: usize,
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        coords: Vec<(f64, f64)>,
        items: &[ItemSpec],
        capacity: f64,
        v_min: f64,
        v_max: f64,
        renting_rate: f64,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::Config(m));
        let n = coords.len();
        if n < 2 {
            return invalid(format!("need at least 2 cities, got {n}"));
        }
        if !(capacity > 0.0 && capacity.is_finite()) {
            return invalid(format!("capacity must be positive, got {capacity}"));
        }
        if !(v_min > 0.0 && v_max > v_min && v_max.is_finite()) {
            return invalid(format!("speeds must satisfy 0 < v_min < v_max, got {v_min}, {v_max}"));
        }
        if !(renting_rate >= 0.0 && renting_rate.is_finite()) {
            return invalid(format!("renting rate must be non-negative, got {renting_rate}"));
        }
        let mut items_at = vec![Vec::new(); n];
        for (idx, item) in items.iter().enumerate() {
            if !(item.profit >= 0.0 && item.weight >= 0.0) {
                return invalid(format!("item {} has negative profit or weight", idx + 1));
            }
            if item.city == 0 || item.city >= n {
                return invalid(format!("item {} assigned to invalid city {}", idx + 1, item.city + 1));
            }
            items_at[item.city].push(idx);
        }
        Ok(Self {
            name: name.into(),
            coords,
            profits: items.iter().map(|i| i.profit).collect(),
            nominal_weights: items.iter().map(|i| i.weight).collect(),
            item_city: items.iter().map(|i| i.city).collect(),
            capacity,
            v_min,
            v_max,
            renting_rate,
            items_at,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_cities(&self) -> usize {
        self.coords.len()
    }

    pub fn num_items(&self) -> usize {
        self.profits.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn profits(&self) -> &[f64] {
        &self.profits
    }

    pub fn nominal_weights(&self) -> &[f64] {
        &self.nominal_weights
    }

    /// 0-based city of each item.
    pub fn item_city(&self) -> &[usize] {
        &self.item_city
    }

    /// Items located at `city`, in index order.
    pub fn items_at(&self, city: usize) -> &[usize] {
        &self.items_at[city]
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn renting_rate(&self) -> f64 {
        self.renting_rate
    }

    /// Speed lost per unit of carried weight, `(v_max - v_min) / B`.
    pub fn nu(&self) -> f64 {
        (self.v_max - self.v_min) / self.capacity
    }

    /// CEIL_2D distance between two 0-based cities.
    ///
    /// Panics if either index is out of range.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        if i == j {
            return 0.0;
        }
        let (dx, dy) = (a.0 - b.0, a.1 - b.1);
        (dx * dx + dy * dy).sqrt().ceil()
    }

    /// Length of the closed cycle visiting `tour` in order.
    pub fn tour_length(&self, tour: &[usize]) -> f64 {
        let n = tour.len();
        (0..n).map(|i| self.distance(tour[i], tour[(i + 1) % n])).sum()
    }

    /// Renders the instance in the benchmark text format.
    pub fn to_ttp_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "PROBLEM NAME: \t{}", self.name);
        let _ = writeln!(out, "KNAPSACK DATA TYPE: \tunknown");
        let _ = writeln!(out, "DIMENSION:\t{}", self.num_cities());
        let _ = writeln!(out, "NUMBER OF ITEMS: \t{}", self.num_items());
        let _ = writeln!(out, "CAPACITY OF KNAPSACK: \t{}", self.capacity);
        let _ = writeln!(out, "MIN SPEED: \t{}", self.v_min);
        let _ = writeln!(out, "MAX SPEED: \t{}", self.v_max);
        let _ = writeln!(out, "RENTING RATIO: \t{}", self.renting_rate);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE:\tCEIL_2D");
        let _ = writeln!(out, "NODE_COORD_SECTION\t(INDEX, X, Y): ");
        for (i, (x, y)) in self.coords.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}", i + 1, x, y);
        }
        let _ = writeln!(out, "ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER): ");
        for i in 0..self.num_items() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                i + 1,
                self.profits[i],
                self.nominal_weights[i],
                self.item_city[i] + 1
            );
        }
        out
    }
}

#[derive(Default)]
struct Header {
    name: Option<String>,
    dimension: Option<usize>,
    items: Option<usize>,
    capacity: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    renting: Option<f64>,
}

enum Section {
    Header,
    Nodes,
    Items,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_num<T: FromStr>(line: usize, field: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {field} from {raw:?}")))
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut header = Header::default();
        let mut section = Section::Header;
        let mut coords = Vec::new();
        let mut items = Vec::new();
        let mut last_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let ln = idx + 1;
            last_line = ln;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("NODE_COORD_SECTION") {
                section = Section::Nodes;
                continue;
            }
            if line.starts_with("ITEMS SECTION") {
                section = Section::Items;
                continue;
            }
            if line == "EOF" {
                break;
            }
            match section {
                Section::Header => {
                    let (key, value) = line
                        .split_once(':')
                        .ok_or_else(|| parse_err(ln, format!("expected `KEY: value`, got {line:?}")))?;
                    let value = value.trim();
                    match key.trim() {
                        "PROBLEM NAME" => header.name = Some(value.to_string()),
                        "KNAPSACK DATA TYPE" => {}
                        "DIMENSION" => header.dimension = Some(parse_num(ln, "DIMENSION", value)?),
                        "NUMBER OF ITEMS" => header.items = Some(parse_num(ln, "NUMBER OF ITEMS", value)?),
                        "CAPACITY OF KNAPSACK" => {
                            header.capacity = Some(parse_num(ln, "CAPACITY OF KNAPSACK", value)?)
                        }
                        "MIN SPEED" => header.v_min = Some(parse_num(ln, "MIN SPEED", value)?),
                        "MAX SPEED" => header.v_max = Some(parse_num(ln, "MAX SPEED", value)?),
                        "RENTING RATIO" => header.renting = Some(parse_num(ln, "RENTING RATIO", value)?),
                        "EDGE_WEIGHT_TYPE" => {
                            if value != "CEIL_2D" {
                                return Err(parse_err(ln, format!("unsupported edge weight type {value:?}")));
                            }
                        }
                        other => return Err(parse_err(ln, format!("unknown header key {other:?}"))),
                    }
                }
                Section::Nodes => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(parse_err(ln, "node line needs `index x y`"));
                    }
                    let index: usize = parse_num(ln, "node index", fields[0])?;
                    if index != coords.len() + 1 {
                        return Err(parse_err(ln, format!("expected node {}, got {index}", coords.len() + 1)));
                    }
                    let x: f64 = parse_num(ln, "x", fields[1])?;
                    let y: f64 = parse_num(ln, "y", fields[2])?;
                    coords.push(((x, y), ln));
                }
                Section::Items => {
                    let fields: Vec<&str> = line.split_whitespace().collect();
                    if fields.len() != 4 {
                        return Err(parse_err(ln, "item line needs `index profit weight city`"));
                    }
                    let index: usize = parse_num(ln, "item index", fields[0])?;
                    if index != items.len() + 1 {
                        return Err(parse_err(ln, format!("expected item {}, got {index}", items.len() + 1)));
                    }
                    let profit: f64 = parse_num(ln, "profit", fields[1])?;
                    let weight: f64 = parse_num(ln, "weight", fields[2])?;
                    let city: usize = parse_num(ln, "assigned node", fields[3])?;
                    if profit < 0.0 || weight < 0.0 {
                        return Err(parse_err(ln, "negative profit or weight"));
                    }
                    if city == 1 {
                        return Err(parse_err(ln, "item assigned to the start city 1"));
                    }
                    if city == 0 {
                        return Err(parse_err(ln, "assigned node must be 1-based"));
                    }
                    items.push((ItemSpec { profit, weight, city: city - 1 }, ln));
                }
            }
        }

        let missing = |key: &str| parse_err(last_line, format!("missing header {key}"));
        let dimension = header.dimension.ok_or_else(|| missing("DIMENSION"))?;
        let item_count = header.items.ok_or_else(|| missing("NUMBER OF ITEMS"))?;
        let capacity = header.capacity.ok_or_else(|| missing("CAPACITY OF KNAPSACK"))?;
        let v_min = header.v_min.ok_or_else(|| missing("MIN SPEED"))?;
        let v_max = header.v_max.ok_or_else(|| missing("MAX SPEED"))?;
        let renting = header.renting.ok_or_else(|| missing("RENTING RATIO"))?;

        if coords.len() != dimension {
            return Err(parse_err(
                last_line,
                format!("DIMENSION is {dimension} but {} nodes were read", coords.len()),
            ));
        }
        if items.len() != item_count {
            return Err(parse_err(
                last_line,
                format!("NUMBER OF ITEMS is {item_count} but {} items were read", items.len()),
            ));
        }
        if let Some((item, ln)) = items.iter().find(|(i, _)| i.city >= dimension) {
            return Err(parse_err(*ln, format!("assigned node {} exceeds DIMENSION", item.city + 1)));
        }

        let coords: Vec<_> = coords.into_iter().map(|(c, _)| c).collect();
        let items: Vec<_> = items.into_iter().map(|(i, _)| i).collect();
        Instance::new(
            header.name.unwrap_or_default(),
            coords,
            &items,
            capacity,
            v_min,
            v_max,
            renting,
        )
        .map_err(|e| parse_err(last_line, e.to_string()))
    }
}
