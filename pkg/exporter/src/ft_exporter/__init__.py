"""Offline embedding exporter: pretrained transformer -> contextual store JSONL."""

from .export import ExportJob, ExportReport, export, export_word_vectors

__all__ = ["ExportJob", "ExportReport", "export", "export_word_vectors"]

__version__ = "0.1.0"
