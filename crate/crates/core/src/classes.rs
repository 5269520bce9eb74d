//! The fixed set of trained object-class models and their groupings.

/// All 25 object-class model names, in canonical (index) order. The index of
/// a name in this table is the value used for the discrete object-class
/// feature, so the order must never change once models have been trained.
pub const OBJECT_CLASSES: [&str; 25] = [
    "bag",
    "bench",
    "bicycle",
    "big-ball",
    "cage",
    "car",
    "cardboard-box",
    "cart",
    "chair",
    "dog",
    "door",
    "ladder",
    "mailbox",
    "microwave",
    "motorcycle",
    "person",
    "person-crouch",
    "person-down",
    "skateboard",
    "small-ball",
    "suv",
    "table",
    "toy-truck",
    "tripod",
    "truck",
];

/// The pose-specific person models. These are the only models that carry
/// part structure, and the only ones eligible for posture features.
pub const PERSON_CLASSES: [&str; 3] = ["person", "person-crouch", "person-down"];

/// Upper bound (exclusive) on root-filter indices, fixing the cardinality of
/// the root-filter discrete feature across training and testing.
pub const ROOT_FILTER_CARDINALITY: usize = 8;

pub fn class_index(name: &str) -> Option<usize> {
    OBJECT_CLASSES.iter().position(|c| *c == name)
}

pub fn is_person_class(name: &str) -> bool {
    PERSON_CLASSES.contains(&name)
}
