from django.db import models


class ExperimentRun(models.Model):
    """Ledger entry for one run_experiment invocation"""
    STATUS_CHOICES = [
        ('success', 'Success'),
        ('diverged', 'Diverged'),
        ('hypothesis_failed', 'Hypothesis failed'),
        ('failed', 'Failed'),
    ]

    system_name = models.CharField(max_length=20)
    seed = models.BigIntegerField()
    path_count = models.PositiveIntegerField()
    workers = models.PositiveIntegerField(default=1)
    strict = models.BooleanField(default=False)

    status = models.CharField(max_length=20, choices=STATUS_CHOICES)
    ms_slope = models.FloatField(null=True, blank=True)
    divergence_count = models.PositiveIntegerField(default=0)
    out_dir = models.CharField(max_length=255)
    message = models.TextField(blank=True)
    config = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return (
            f"{self.system_name} seed={self.seed} N={self.path_count} "
            f"({self.get_status_display()})"
        )
