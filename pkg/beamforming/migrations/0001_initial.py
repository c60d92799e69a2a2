# Generated by Django 4.2 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('mode', models.CharField(max_length=32)),
                ('master_seed', models.CharField(max_length=20)),
                ('config_toml', models.TextField()),
                ('csv_path', models.CharField(blank=True, default='', max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='SweepResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('mode', models.CharField(max_length=32)),
                ('p_max_dbm', models.FloatField()),
                ('seed', models.CharField(max_length=20)),
                ('iterations', models.PositiveIntegerField()),
                ('sum_rate_bpshz', models.FloatField()),
                ('sum_rate_per_sc', models.FloatField()),
                ('initial_sum_rate', models.FloatField(default=0.0)),
                ('disagreement', models.FloatField()),
                ('per_user_rates', models.JSONField(default=list)),
                ('per_bs_power', models.JSONField(default=list)),
                ('wall_ms', models.FloatField(default=0.0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='results', to='beamforming.simulationrun')),
            ],
            options={
                'ordering': ['run', 'id'],
            },
        ),
    ]
