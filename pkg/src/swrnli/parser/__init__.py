from .decode import decode_tree, greedy_heads, mst_heads, tree_score
from .estimator import BiaffineParser, extract_swrs, predict_trees, train_parser
from .metrics import attachment_scores, corpus_attachment_scores
from .model import ParserConfig, ParserModel

__all__ = ["BiaffineParser", "ParserConfig", "ParserModel", "attachment_scores",
           "corpus_attachment_scores", "decode_tree", "extract_swrs", "greedy_heads",
           "mst_heads", "predict_trees", "train_parser", "tree_score"]
