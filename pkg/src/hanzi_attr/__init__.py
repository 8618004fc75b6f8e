"""Open-set Chinese character recognition through multi-typed attributes.

Characters are described by 23 attribute sets (pronunciation, structure,
stroke count, three input-method codes, four-corner code) concatenated
into one binary vector.  Recognition is nearest neighbour in Hamming
space against a lexicon of encoded dictionary entries, so characters
never seen in training remain recognizable as long as their attributes
are predicted well.
"""

__version__ = "0.1.0"

from .codec import (AttributeVector, CharacterEntry, Lexicon, build_lexicon,
                    decode_vector, encode_entry, parse_dictionary,
                    parse_dictionary_file, project_subset)
from .errors import Diagnostic, ValidationError
from .matcher import Candidate, PredictionSet, argmax_onehot, distances, hamming, recognize
from .schema import AttributeSchema, AttributeSet, default_schema, load_schema, load_schema_file

__all__ = [
    "AttributeSchema", "AttributeSet", "AttributeVector", "Candidate",
    "CharacterEntry", "Diagnostic", "Lexicon", "PredictionSet",
    "ValidationError", "argmax_onehot", "build_lexicon", "decode_vector",
    "default_schema", "distances", "encode_entry", "hamming", "load_schema",
    "load_schema_file", "parse_dictionary", "parse_dictionary_file",
    "project_subset", "recognize", "__version__",
]
