import re
import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Tuple

import yaml

from data.models import Syllable
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

_DIGIT_OR_TEXT = re.compile(r"\d|\D+")


def _canonical(text: str) -> str:
    return unicodedata.normalize('NFC', unicodedata.normalize('NFC', text).lower())


@dataclass(frozen=True)
class NormRuleSet:
    """规范化规则：数字映射、缩写表、需删除的正字法标点"""
    digit_map: Dict[str, str] = field(default_factory=dict)
    abbreviation_map: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    strip_chars: FrozenSet[str] = frozenset()

    def __post_init__(self):
        outputs = list(self.digit_map.values())
        for words in self.abbreviation_map.values():
            outputs.extend(words)
        for word in outputs:
            # 输出本身必须已是规范形式，否则 normalize 不再幂等
            if not word or any(ch.isspace() for ch in word):
                raise ConfigError(f"规则输出 {word!r} 不能为空或包含空白")
            if word != _canonical(word):
                raise ConfigError(f"规则输出 {word!r} 必须为小写 NFC 形式")
            if any(ch in self.strip_chars for ch in word) or any(ch.isdigit() for ch in word):
                raise ConfigError(f"规则输出 {word!r} 含有标点或数字")
            if word in self.abbreviation_map:
                raise ConfigError(f"规则输出 {word!r} 本身又是缩写键")


def load_rules(path) -> NormRuleSet:
    """从 YAML 加载规则集"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"无法读取规范化规则 {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"规范化规则 {path} 不是合法的 YAML: {e}") from e

    unknown = sorted(set(data) - {"digit_map", "abbreviation_map", "strip_chars"})
    if unknown:
        raise ConfigError(f"规范化规则含未知字段: {', '.join(unknown)}")

    digit_map = {}
    for digit, word in (data.get("digit_map") or {}).items():
        digit = str(digit)
        if len(digit) != 1 or not digit.isdigit():
            raise ConfigError(f"digit_map 的键必须是单个数字: {digit!r}")
        digit_map[digit] = str(word)

    abbreviation_map = {}
    for key, words in (data.get("abbreviation_map") or {}).items():
        if isinstance(words, str):
            words = words.split()
        abbreviation_map[_canonical(str(key))] = tuple(str(w) for w in words)

    strip_chars = frozenset(str(data.get("strip_chars") or ""))
    return NormRuleSet(digit_map=digit_map, abbreviation_map=abbreviation_map, strip_chars=strip_chars)


def _is_known_symbol(text: str) -> bool:
    return all(ch.isalpha() or ch.isdigit() or unicodedata.category(ch).startswith('M') for ch in text)


def _expand_piece(piece: str, rules: NormRuleSet) -> List[str]:
    """缩写展开 + 逐位数字展开；未知符号原样保留"""
    if piece in rules.abbreviation_map:
        return list(rules.abbreviation_map[piece])

    words = []
    for run in _DIGIT_OR_TEXT.findall(piece):
        if run.isdigit() and len(run) == 1:
            words.append(rules.digit_map.get(run, run))
        elif run in rules.abbreviation_map:
            words.extend(rules.abbreviation_map[run])
        else:
            if not _is_known_symbol(run):
                logger.warning(f"未知符号，按独立音节保留: {run!r}")
            words.append(run)
    return words


def normalize(raw_text: str, rules: NormRuleSet) -> List[Syllable]:
    """规范化并切分原始文本为音节序列

    NFC + 小写，删除正字法标点（替换为空格），展开数字与缩写，按空白切分。
    """
    syllables: List[Syllable] = []
    for raw_token in unicodedata.normalize('NFC', raw_text).split():
        letters = [ch for ch in raw_token if ch.isalpha()]
        token = _canonical(raw_token)
        if token in rules.abbreviation_map:
            syllables.extend(Syllable(w) for w in rules.abbreviation_map[token])
            continue
        if len(letters) >= 2 and all(ch.isupper() for ch in letters):
            # 可能是外来缩写（如 VLSP），按一个音节处理
            logger.info(f"疑似外来缩写，按单个音节处理: {raw_token}")

        cleaned = "".join(" " if ch in rules.strip_chars else ch for ch in token)
        for piece in cleaned.split():
            syllables.extend(Syllable(w) for w in _expand_piece(piece, rules))
    return syllables


class TextNormalizer:
    """带规则集的规范化器，供流水线并发调用（无可变状态）"""

    def __init__(self, rules: NormRuleSet):
        self.rules = rules

    @classmethod
    def from_file(cls, path) -> "TextNormalizer":
        rules = load_rules(path)
        logger.info(f"加载规范化规则 {path}: {len(rules.digit_map)} 个数字, {len(rules.abbreviation_map)} 个缩写")
        return cls(rules)

    def normalize(self, raw_text: str) -> List[Syllable]:
        return normalize(raw_text, self.rules)
