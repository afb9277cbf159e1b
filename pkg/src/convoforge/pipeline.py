"""Dataset synthesis: ingest, generate, simplify, dedup, split, export.

The flow per corpus section: draw a question-answer pair from the text,
rephrase the answer until it clears the readability gate (up to
max_attempts tries), embed the question, and reject it if it nearly
duplicates an accepted one. Every consumed section ends in exactly one
of four outcomes, so accepted + discarded_readability +
rejected_duplicate + generation_error always equals the number of
sections consumed.

Workers run concurrently, but results are consumed in submission order
and all dedup decisions and file appends happen on one serial stage, so
a fixed seed gives a bit-identical run.
"""

from __future__ import annotations

import json
import logging
import random
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from . import prompts
from .dedup import EmbeddingVector, QuestionIndex, load_index, save_index
from .gateway import ChatMessage, GatewayError
from .textmetrics import UnscorableTextError, flesch_reading_ease

logger = logging.getLogger(__name__)

OUTCOMES = ("accepted", "discarded_readability", "rejected_duplicate", "generation_error")

SAMPLES_FILENAME = "samples.jsonl"
TRACES_FILENAME = "traces.jsonl"
MANIFEST_FILENAME = "manifest.json"
INDEX_FILENAME = "index.tsv"

# Signature of the chat seam: (messages, temperature) -> assistant text.
ChatFn = Callable[[Sequence[ChatMessage], float], str]
# (texts) -> one embedding per text, order preserved.
EmbedFn = Callable[[Sequence[str]], list[EmbeddingVector]]


class QaParseError(Exception):
    """Model output for the QA step was not the required JSON object."""


@dataclass(frozen=True)
class CorpusSection:
    section_id: str
    text: str
    char_length: int
    source_url: Optional[str] = None

    def __post_init__(self):
        if self.char_length != len(self.text):
            raise ValueError("char_length must equal len(text)")


@dataclass(frozen=True)
class QaSample:
    sample_id: str
    question: str
    answer_original: str
    answer_simplified: str
    flesch_score: float
    attempts_used: int
    section_id: str

    def __post_init__(self):
        if not self.question:
            raise ValueError("question must be non-empty")
        if self.attempts_used < 1:
            raise ValueError("attempts_used must be >= 1")

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: Mapping) -> "QaSample":
        return cls(**{k: record[k] for k in (
            "sample_id", "question", "answer_original", "answer_simplified",
            "flesch_score", "attempts_used", "section_id",
        )})


@dataclass(frozen=True)
class PipelineConfig:
    generation_model: str = "default-chat"
    embedding_model: str = "default-embed"
    min_section_chars: int = 700
    accept_threshold: float = 75.0
    max_attempts: int = 3
    dedup_threshold: float = 0.8
    target_samples: int = 10000
    validation_size: int = 1000
    subset_sizes: tuple[int, ...] = (100, 1000, 5000, 9000)
    concurrency_limit: int = 8
    random_seed: int = 1234
    generation_temperature: float = 0.7
    max_output_tokens: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "subset_sizes", tuple(self.subset_sizes))
        if self.validation_size >= self.target_samples:
            raise ValueError("validation_size must be smaller than target_samples")
        training_pool = self.target_samples - self.validation_size
        for size in self.subset_sizes:
            if size > training_pool:
                raise ValueError(
                    f"subset size {size} exceeds training pool "
                    f"{training_pool} (target_samples - validation_size)"
                )
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if self.min_section_chars < 0:
            raise ValueError("min_section_chars must be >= 0")
        if not 0 < self.dedup_threshold <= 1:
            raise ValueError("dedup_threshold must be in (0, 1]")


@dataclass
class GenerationTrace:
    section_id: str
    outcome: str
    attempt_scores: list[float] = field(default_factory=list)
    sample_id: Optional[str] = None
    nearest_id: Optional[str] = None
    nearest_similarity: Optional[float] = None
    error: Optional[str] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class IngestResult:
    sections: list[CorpusSection]
    skipped_missing_text: int = 0
    excluded_short: int = 0


def read_corpus_file(path) -> list[dict]:
    """Line-delimited JSON records; raises on an unparseable line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON record") from exc
    return records


def ingest_corpus(
    records: Iterable[Mapping],
    config: PipelineConfig,
    shuffle: bool = True,
) -> IngestResult:
    """Filter raw records down to usable sections.

    Records are materialized so the seeded shuffle can run; relative
    order is otherwise preserved. Records without a usable text field
    are skipped with a warning, short sections are dropped silently per
    the length floor.
    """
    materialized = list(records)
    if shuffle:
        random.Random(config.random_seed).shuffle(materialized)
    result = IngestResult(sections=[])
    for position, record in enumerate(materialized):
        text = record.get("text") if isinstance(record, Mapping) else None
        if not isinstance(text, str) or not text:
            result.skipped_missing_text += 1
            logger.warning("corpus record %d has no usable text field; skipped", position)
            continue
        if len(text) < config.min_section_chars:
            result.excluded_short += 1
            continue
        section_id = record.get("id") or record.get("section_id") or f"sec{position:06d}"
        result.sections.append(
            CorpusSection(
                section_id=str(section_id),
                text=text,
                char_length=len(text),
                source_url=record.get("url"),
            )
        )
    return result


def _parse_qa_payload(raw: str) -> Optional[tuple[str, str]]:
    try:
        payload = json.loads(raw.strip())
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict) or set(payload) != {"question", "answer"}:
        return None
    question, answer = payload["question"], payload["answer"]
    if not isinstance(question, str) or not isinstance(answer, str):
        return None
    if not question or not answer:
        return None
    return question, answer


def generate_qa(
    section: CorpusSection,
    config: PipelineConfig,
    chat: ChatFn,
    template: str = prompts.QA_GENERATION_TEMPLATE,
) -> tuple[str, str]:
    """Step 1: question + original answer for a section.

    The model must return a strict two-field JSON object; one parse
    retry is allowed before the section is written off.
    """
    prompt = template.format(section_text=section.text)
    messages = [ChatMessage("user", prompt)]
    raw = ""
    for _ in range(2):
        raw = chat(messages, config.generation_temperature)
        parsed = _parse_qa_payload(raw)
        if parsed is not None:
            return parsed
    raise QaParseError(f"unparseable QA output after retry: {raw[:200]!r}")


@dataclass
class SimplifyResult:
    accepted: bool
    attempt_scores: list[float]
    answer_simplified: Optional[str] = None
    flesch_score: Optional[float] = None
    attempts_used: Optional[int] = None


def simplify_until_pass(
    question: str,
    answer_original: str,
    config: PipelineConfig,
    chat: ChatFn,
    template: str = prompts.SIMPLIFY_TEMPLATE,
) -> SimplifyResult:
    """Step 2: rephrase until the score clears the gate, else discard.

    The first passing attempt is kept; once an attempt passes, no
    further calls are issued. Attempts after the first feed back the
    latest rephrase so each round simplifies further.
    """
    if not question or not answer_original:
        raise ValueError("question and answer_original must be non-empty")
    current = answer_original
    scores: list[float] = []
    for attempt in range(1, config.max_attempts + 1):
        prompt = template.format(question=question, answer=current)
        candidate = chat([ChatMessage("user", prompt)], config.generation_temperature)
        score = flesch_reading_ease(candidate).flesch_score
        scores.append(score)
        if score >= config.accept_threshold:
            return SimplifyResult(
                accepted=True,
                attempt_scores=scores,
                answer_simplified=candidate,
                flesch_score=score,
                attempts_used=attempt,
            )
        current = candidate
    return SimplifyResult(accepted=False, attempt_scores=scores)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class _SectionWork:
    """Everything a worker can decide without touching shared state."""
    section: CorpusSection
    outcome: str  # "candidate" or a terminal outcome
    attempt_scores: list[float] = field(default_factory=list)
    question: Optional[str] = None
    answer_original: Optional[str] = None
    answer_simplified: Optional[str] = None
    flesch_score: Optional[float] = None
    attempts_used: Optional[int] = None
    embedding: Optional[EmbeddingVector] = None
    error: Optional[str] = None
    started_at: str = ""
    finished_at: str = ""


def _process_section(
    section: CorpusSection,
    config: PipelineConfig,
    chat: ChatFn,
    embed: EmbedFn,
    qa_template: str = prompts.QA_GENERATION_TEMPLATE,
    simplify_template: str = prompts.SIMPLIFY_TEMPLATE,
) -> _SectionWork:
    work = _SectionWork(section=section, outcome="generation_error", started_at=_utc_now())
    try:
        question, answer_original = generate_qa(section, config, chat, qa_template)
    except (QaParseError, GatewayError) as exc:
        work.error = str(exc)
        work.finished_at = _utc_now()
        return work
    work.question = question
    work.answer_original = answer_original
    try:
        simplified = simplify_until_pass(
            question, answer_original, config, chat, simplify_template
        )
    except (GatewayError, UnscorableTextError) as exc:
        work.error = str(exc)
        work.finished_at = _utc_now()
        return work
    work.attempt_scores = simplified.attempt_scores
    if not simplified.accepted:
        work.outcome = "discarded_readability"
        work.finished_at = _utc_now()
        return work
    work.answer_simplified = simplified.answer_simplified
    work.flesch_score = simplified.flesch_score
    work.attempts_used = simplified.attempts_used
    try:
        # Embedding is paid only for gate-passing samples, right before
        # the dedup decision.
        work.embedding = embed([question])[0]
    except GatewayError as exc:
        work.error = f"embedding failed: {exc}"
        work.finished_at = _utc_now()
        return work
    work.outcome = "candidate"
    work.finished_at = _utc_now()
    return work


@dataclass
class PipelineResult:
    manifest: dict
    samples: list[QaSample]
    traces: list[GenerationTrace]
    out_dir: Path
    shortfall: bool


def _load_resume_state(out_dir: Path, config: PipelineConfig):
    samples: list[QaSample] = []
    consumed: set[str] = set()
    counts = {outcome: 0 for outcome in OUTCOMES}
    samples_path = out_dir / SAMPLES_FILENAME
    if samples_path.exists():
        for record in read_corpus_file(samples_path):
            samples.append(QaSample.from_record(record))
    traces_path = out_dir / TRACES_FILENAME
    if traces_path.exists():
        for record in read_corpus_file(traces_path):
            consumed.add(record["section_id"])
            if record["outcome"] in counts:
                counts[record["outcome"]] += 1
    index_path = out_dir / INDEX_FILENAME
    if index_path.exists():
        index = load_index(index_path, threshold=config.dedup_threshold)
    else:
        index = QuestionIndex(threshold=config.dedup_threshold)
    return samples, consumed, counts, index


def run_pipeline(
    config: PipelineConfig,
    records: Iterable[Mapping],
    chat: ChatFn,
    embed: EmbedFn,
    out_dir,
    resume: bool = False,
    limit: Optional[int] = None,
    qa_template: str = prompts.QA_GENERATION_TEMPLATE,
    simplify_template: str = prompts.SIMPLIFY_TEMPLATE,
) -> PipelineResult:
    """Drive the full synthesis loop and persist its artifacts.

    Writes samples.jsonl, traces.jsonl, manifest.json, and the dedup
    index snapshot under out_dir. Corpus exhaustion before
    target_samples is a warning plus a manifest flag, never a failure.
    With resume=True, previously consumed sections are skipped and
    existing outputs are extended.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ingest = ingest_corpus(records, config)
    sections = ingest.sections
    if limit is not None:
        sections = sections[:limit]

    if resume:
        samples, consumed, counts, index = _load_resume_state(out_dir, config)
        sections = [s for s in sections if s.section_id not in consumed]
        consumed_before = len(consumed)
    else:
        samples = []
        counts = {outcome: 0 for outcome in OUTCOMES}
        index = QuestionIndex(threshold=config.dedup_threshold)
        consumed_before = 0
        for stale in (SAMPLES_FILENAME, TRACES_FILENAME):
            stale_path = out_dir / stale
            if stale_path.exists():
                stale_path.unlink()

    traces: list[GenerationTrace] = []
    mode = "a" if resume else "w"
    with open(out_dir / SAMPLES_FILENAME, mode, encoding="utf-8") as samples_fh, \
            open(out_dir / TRACES_FILENAME, mode, encoding="utf-8") as traces_fh, \
            ThreadPoolExecutor(max_workers=config.concurrency_limit) as pool:
        section_iter = iter(sections)
        window: deque[tuple[CorpusSection, Future]] = deque()

        def submit_next() -> bool:
            try:
                section = next(section_iter)
            except StopIteration:
                return False
            window.append(
                (section, pool.submit(
                    _process_section, section, config, chat, embed,
                    qa_template, simplify_template,
                ))
            )
            return True

        for _ in range(config.concurrency_limit):
            if not submit_next():
                break

        while window and len(samples) < config.target_samples:
            section, future = window.popleft()
            work = future.result()
            submit_next()

            trace = GenerationTrace(
                section_id=section.section_id,
                outcome=work.outcome,
                attempt_scores=work.attempt_scores,
                error=work.error,
                started_at=work.started_at,
                finished_at=work.finished_at,
            )
            if work.outcome == "candidate":
                sample_id = f"qa-{section.section_id}"
                decision = index.check_and_insert(sample_id, work.embedding)
                if decision.accepted:
                    sample = QaSample(
                        sample_id=sample_id,
                        question=work.question,
                        answer_original=work.answer_original,
                        answer_simplified=work.answer_simplified,
                        flesch_score=work.flesch_score,
                        attempts_used=work.attempts_used,
                        section_id=section.section_id,
                    )
                    samples.append(sample)
                    samples_fh.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")
                    trace.outcome = "accepted"
                    trace.sample_id = sample_id
                else:
                    trace.outcome = "rejected_duplicate"
                    trace.nearest_id = decision.nearest_id
                    trace.nearest_similarity = decision.nearest_similarity
            counts[trace.outcome] += 1
            traces.append(trace)
            traces_fh.write(json.dumps(trace.to_record(), ensure_ascii=False) + "\n")

        for _, leftover in window:
            leftover.cancel()
        pool.shutdown(wait=True, cancel_futures=True)

    save_index(index, out_dir / INDEX_FILENAME)

    shortfall = len(samples) < config.target_samples
    if shortfall:
        logger.warning(
            "corpus exhausted at %d of %d target samples; dataset is partial",
            len(samples), config.target_samples,
        )
    manifest = {
        "config": _config_echo(config),
        "counts": dict(counts),
        "consumed_sections": consumed_before + len(traces),
        "skipped_missing_text": ingest.skipped_missing_text,
        "excluded_short": ingest.excluded_short,
        "sample_count": len(samples),
        "shortfall": shortfall,
    }
    with open(out_dir / MANIFEST_FILENAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return PipelineResult(
        manifest=manifest, samples=samples, traces=traces,
        out_dir=out_dir, shortfall=shortfall,
    )


def _config_echo(config: PipelineConfig) -> dict:
    echo = asdict(config)
    echo["subset_sizes"] = list(config.subset_sizes)
    return echo


@dataclass
class DatasetSplits:
    validation: list[QaSample]
    subsets: dict[int, list[QaSample]]


def split_dataset(samples: Sequence[QaSample], config: PipelineConfig) -> DatasetSplits:
    """Seeded shuffle, then carve the validation set and nested subsets.

    Subsets are prefixes of one shuffled training pool, so the 100 set
    is contained in the 1000 set and so on up; none of them overlaps
    the validation set.
    """
    largest = max(config.subset_sizes)
    needed = config.validation_size + largest
    if len(samples) < needed:
        raise ValueError(
            f"need at least {needed} samples "
            f"(validation {config.validation_size} + largest subset {largest}), "
            f"got {len(samples)}"
        )
    shuffled = list(samples)
    random.Random(config.random_seed).shuffle(shuffled)
    validation = shuffled[: config.validation_size]
    pool = shuffled[config.validation_size :]
    subsets = {size: pool[:size] for size in config.subset_sizes}
    return DatasetSplits(validation=validation, subsets=subsets)


def export_finetune_file(split: Sequence[QaSample], system_prompt: str, path) -> int:
    """Write chat-format training records, one JSON object per line.

    Each record carries exactly three messages: the system prompt, the
    question, and the simplified answer. Returns the record count.
    """
    if not split:
        raise ValueError("cannot export an empty split")
    if not system_prompt:
        raise ValueError("system_prompt must be non-empty")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for sample in split:
            record = {
                "messages": [
                    {"role": "system", "content": system_prompt},
                    {"role": "user", "content": sample.question},
                    {"role": "assistant", "content": sample.answer_simplified},
                ]
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(split)
