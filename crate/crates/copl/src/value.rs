//! Runtime values.

/// Index of a live object in the object table. Handles are never reused
/// within one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RootHandle(pub usize);

/// Index of a `Storage` instance owned by the execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StorageId(pub usize);

/// Index of a `Map` instance owned by the execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapId(pub usize);

/// One by-value reference segment: the concept whose reference class it
/// instantiates, plus the segment's field values in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub concept: String,
    pub fields: Vec<(String, Value)>,
}

impl Segment {
    pub fn field(&self, name: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// A complex reference: the full identifier of an object, one segment per
/// ancestor reference class, high (outermost context) first. Immutable
/// once constructed; copies compare equal field-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexReference {
    pub target_type: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Long(i64),
    Double(f64),
    /// Internal only: produced by comparisons, consumed by `if`.
    Bool(bool),
    Str(String),
    Handle(RootHandle),
    Reference(ComplexReference),
    Storage(StorageId),
    Map(MapId),
    /// Uninitialized reference-like value; any use faults.
    Nil,
    Void,
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Long(_) => "long",
            Value::Double(_) => "double",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "String",
            Value::Handle(_) => "Root",
            Value::Reference(_) => "reference",
            Value::Storage(_) => "Storage",
            Value::Map(_) => "Map",
            Value::Nil => "nil",
            Value::Void => "void",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Long(_) | Value::Double(_))
    }

    /// Canonical text rendering used by `print`: strings as-is, integers
    /// in decimal, doubles in shortest round-trip decimal with the
    /// fractional part dropped when integral (`100.0` prints as `100`).
    pub fn render(&self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s.clone()),
            Value::Int(n) | Value::Long(n) => Some(n.to_string()),
            Value::Double(d) => Some(format!("{}", d)),
            _ => None,
        }
    }
}
