from django.db import models


class SimulationRun(models.Model):
    """One invocation of the simulate command: mode, seed and the effective config."""

    mode = models.CharField(max_length=32)
    # u64 seeds do not fit a signed 64-bit column
    master_seed = models.CharField(max_length=20)
    config_toml = models.TextField()
    csv_path = models.CharField(max_length=500, blank=True, default='')
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.mode} (seed {self.master_seed}) @ {self.created_at:%Y-%m-%d %H:%M}"


class SweepResult(models.Model):
    """One sweep cell, mirroring a row of the result CSV."""

    run = models.ForeignKey(SimulationRun, on_delete=models.CASCADE, related_name='results')
    mode = models.CharField(max_length=32)
    p_max_dbm = models.FloatField()
    seed = models.CharField(max_length=20)
    iterations = models.PositiveIntegerField()
    sum_rate_bpshz = models.FloatField()
    sum_rate_per_sc = models.FloatField()
    initial_sum_rate = models.FloatField(default=0.0)
    disagreement = models.FloatField()
    per_user_rates = models.JSONField(default=list)
    per_bs_power = models.JSONField(default=list)
    wall_ms = models.FloatField(default=0.0)

    class Meta:
        ordering = ['run', 'id']

    def __str__(self):
        return f"{self.mode} {self.p_max_dbm} dBm seed {self.seed}: {self.sum_rate_bpshz:.4f} bit/s/Hz"
