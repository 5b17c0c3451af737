//! FER2013 and FER+ datasets: parsing, 8-class label merge, histograms,
//! normalization and augmentation.

mod augment;
mod fer;

pub use augment::{
    horizontal_flip, random_erase, random_erase_region, EraseRegion, ERASE_AREA, ERASE_ASPECT,
    ERASE_TRIES,
};
pub use fer::{
    class_histogram, examples_for, inverse_frequency_weights, merge_labels, normalize_image,
    parse_fer2013_csv, parse_ferplus_csv, read_fer2013, read_ferplus, write_fer2013_csv,
    Example, FerPlusVotes, FerSample, LabeledSample, MergeReport, Usage, EMOTIONS, FER_LABELS,
    IMAGE_SIDE, MIN_WINNING_VOTES, NUM_CLASSES, PIXELS,
};
