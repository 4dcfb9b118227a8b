use serde::{Deserialize, Serialize};

/// A point in meters. `z` is fixed per node class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    /// Distance in the horizontal plane only.
    pub fn ground_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Square deployment area `[0, side] x [0, side]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub side: f64,
}

impl Area {
    pub fn new(side: f64) -> Self {
        Self { side }
    }

    pub fn surface(&self) -> f64 {
        self.side * self.side
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }

    pub fn center(&self, z: f64) -> Position {
        Position::new(self.side / 2.0, self.side / 2.0, z)
    }
}

/// Mean of a set of positions. Returns `None` for an empty iterator.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a Position>) -> Option<Position> {
    let (mut sx, mut sy, mut sz, mut n) = (0.0, 0.0, 0.0, 0usize);
    for p in points {
        sx += p.x;
        sy += p.y;
        sz += p.z;
        n += 1;
    }
    (n > 0).then(|| {
        let n = n as f64;
        Position::new(sx / n, sy / n, sz / n)
    })
}
