//! Flat parameter vectors with a stable, named index map.

/// One named contiguous block of parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Deterministic layout of a flat parameter vector: segments are appended in
/// construction order, so identical model structure yields identical maps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves `len` slots under `name`, returning the segment offset.
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> usize {
        let offset = self.len;
        self.segments.push(Segment {
            name: name.into(),
            offset,
            len,
        });
        self.len += len;
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// All trainable parameters of a model as one flat vector plus its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub data: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn zeros(layout: ParamLayout) -> Self {
        ParamVector {
            data: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .find(name)
            .map(|s| &self.data[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let seg = self.layout.find(name)?.clone();
        Some(&mut self.data[seg.offset..seg.offset + seg.len])
    }

    /// Flatten is the identity on the stored data; unflatten checks length.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.data.len(), "unflatten: length mismatch");
        self.data.copy_from_slice(flat);
    }
}
