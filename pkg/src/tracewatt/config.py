"""Analysis configuration and its INI-style file format.

    [analysis]
    alpha = 0.05
    aggregation = mean            # mean | median
    observation_unit = per_sample # per_sample | per_test_mean
    top_k_tests = 100             # omit to analyze every aligned test

    [api_rules]
    android. = android
    java. = java

    [power_clock_offset_us]
    com.example.FooTest::testBar = 125.0

Only ``=`` delimits keys from values (test names contain ``::``), ``#``
starts a comment, and key case is preserved.  Emission is canonical:
parse -> emit -> parse is the identity and emit is byte-stable.
"""

import configparser
from dataclasses import dataclass, field

from .apimetric import ApiRule

DEFAULT_API_RULES = (
    ApiRule("android.", "android"),
    ApiRule("java.", "java"),
    ApiRule("javax.", "javax"),
    ApiRule("dalvik.", "dalvik"),
)

AGGREGATIONS = ("mean", "median")
OBSERVATION_UNITS = ("per_sample", "per_test_mean")


class ConfigError(ValueError):
    """The configuration file is malformed or holds an invalid value."""


@dataclass
class AnalysisConfig:
    api_rules: tuple[ApiRule, ...] = DEFAULT_API_RULES
    alpha: float = 0.05
    aggregation: str = "mean"
    observation_unit: str = "per_sample"
    top_k_tests: "int | None" = None
    power_clock_offset_us: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")
        if self.observation_unit not in OBSERVATION_UNITS:
            raise ConfigError(f"observation_unit must be one of {OBSERVATION_UNITS}")
        if self.top_k_tests is not None and self.top_k_tests < 1:
            raise ConfigError(f"top_k_tests must be >= 1, got {self.top_k_tests}")
        prefixes = [r.prefix for r in self.api_rules]
        if len(set(prefixes)) != len(prefixes):
            raise ConfigError("duplicate api_rules prefixes")
        if not self.api_rules:
            raise ConfigError("api_rules must not be empty")


def parse_config(text: str) -> AnalysisConfig:
    parser = configparser.RawConfigParser(
        delimiters=("=",), comment_prefixes=("#",), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config: {exc}") from None

    known = {"analysis", "api_rules", "power_clock_offset_us"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs = {}
    if "analysis" in parser:
        section = parser["analysis"]
        allowed = {"alpha", "aggregation", "observation_unit", "top_k_tests"}
        extra = set(section) - allowed
        if extra:
            raise ConfigError(f"unknown [analysis] keys: {sorted(extra)}")
        if "alpha" in section:
            try:
                kwargs["alpha"] = float(section["alpha"])
            except ValueError:
                raise ConfigError(f"alpha = {section['alpha']!r} is not a number") from None
        if "aggregation" in section:
            kwargs["aggregation"] = section["aggregation"]
        if "observation_unit" in section:
            kwargs["observation_unit"] = section["observation_unit"]
        if "top_k_tests" in section:
            raw = section["top_k_tests"]
            try:
                kwargs["top_k_tests"] = int(raw)
            except ValueError:
                raise ConfigError(f"top_k_tests = {raw!r} is not an integer") from None
    if "api_rules" in parser:
        rules = []
        for prefix, label in parser["api_rules"].items():
            try:
                rules.append(ApiRule(prefix, label))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        kwargs["api_rules"] = tuple(rules)
    if "power_clock_offset_us" in parser:
        offsets = {}
        for test_name, raw in parser["power_clock_offset_us"].items():
            try:
                offsets[test_name] = float(raw)
            except ValueError:
                raise ConfigError(
                    f"power_clock_offset_us {test_name} = {raw!r} is not a number"
                ) from None
        kwargs["power_clock_offset_us"] = offsets
    return AnalysisConfig(**kwargs)


def emit_config(config: AnalysisConfig) -> str:
    """Canonical text form; parse_config(emit_config(c)) == c."""
    lines = [
        "[analysis]",
        f"alpha = {config.alpha!r}",
        f"aggregation = {config.aggregation}",
        f"observation_unit = {config.observation_unit}",
    ]
    if config.top_k_tests is not None:
        lines.append(f"top_k_tests = {config.top_k_tests}")
    lines.append("")
    lines.append("[api_rules]")
    for rule in config.api_rules:
        lines.append(f"{rule.prefix} = {rule.label}")
    if config.power_clock_offset_us:
        lines.append("")
        lines.append("[power_clock_offset_us]")
        for test_name in sorted(config.power_clock_offset_us):
            lines.append(f"{test_name} = {config.power_clock_offset_us[test_name]!r}")
    return "\n".join(lines) + "\n"
