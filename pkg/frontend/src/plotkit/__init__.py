from .render import MalformedCsvError, MissingFileError, ReportBundle, render_report

__all__ = ["MalformedCsvError", "MissingFileError", "ReportBundle", "render_report"]
