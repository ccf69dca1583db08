from django.db import models
from django.utils import timezone


class ExperimentRun(models.Model):
    STATUS_RUNNING = 'running'
    STATUS_COMPLETED = 'completed'
    STATUS_FAILED = 'failed'
    STATUS_CHOICES = [
        (STATUS_RUNNING, 'Running'),
        (STATUS_COMPLETED, 'Completed'),
        (STATUS_FAILED, 'Failed'),
    ]

    scenario = models.CharField(max_length=32)
    config_hash = models.CharField(max_length=64, db_index=True)
    config = models.JSONField()
    summary = models.JSONField(default=list)  # rows of summary.csv
    output_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default=STATUS_RUNNING)
    error = models.TextField(blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        return f"{self.scenario} run {self.config_hash[:12]} ({self.status})"

    @classmethod
    def start(cls, config_hash: str, scenario: str, config: dict, output_dir: str) -> 'ExperimentRun':
        return cls.objects.create(scenario=scenario, config_hash=config_hash, config=config,
                                  output_dir=output_dir)

    def complete(self, summary_rows: list) -> None:
        self.status = self.STATUS_COMPLETED
        self.summary = summary_rows
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'summary', 'finished_at'])

    def fail(self, error: str) -> None:
        self.status = self.STATUS_FAILED
        self.error = error
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'error', 'finished_at'])
